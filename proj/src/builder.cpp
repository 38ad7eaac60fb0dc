#include <spock/builder.hpp>
#include <spock/error.hpp>
#include <spock/process.hpp>
#include <spock/rungate.hpp>

#include <algorithm>
#include <cctype>
#include <cstdlib>
#include <fstream>
#include <regex>

namespace fs = std::filesystem;

namespace spock {

namespace {

class ScratchDir {
public:
    ScratchDir() {
        auto tmpl = (fs::temp_directory_path() / "spock-build-XXXXXX").string();
        if (!::mkdtemp(tmpl.data())) throw Error(ErrorCode::engine, "cannot create scratch directory");
        path_ = tmpl;
    }
    ScratchDir(const ScratchDir&) = delete;
    ScratchDir& operator=(const ScratchDir&) = delete;
    ~ScratchDir() {
        std::error_code ec;
        fs::remove_all(path_, ec);
    }
    const fs::path& path() const { return path_; }

private:
    fs::path path_;
};

std::string engine_recipe_text(const BuildRequest& request) {
    if (!request.parent_image) return request.recipe.content;
    std::string out;
    for (const auto& l : request.parsed.preamble) out += l + "\n";
    out += "FROM " + image_reference(*request.parent_image) + "\n";
    for (std::size_t i = 0; i < request.parsed.steps.size(); ++i) {
        out += request.parsed.steps[i];
        if (i + 1 < request.parsed.steps.size() || request.recipe.content.ends_with('\n')) out += "\n";
    }
    return out;
}

const ImageRecord& require_live_image(const LedgerState& st, const ImageId& id) {
    const auto* img = st.find_image(id);
    if (!img) throw Error(ErrorCode::not_found, "unknown image " + id.str());
    if (img->status != RecordStatus::live) throw Error(ErrorCode::purged, "image " + id.str() + " is purged");
    return *img;
}

const RecipeRecord& require_buildable_recipe(const LedgerState& st, const Digest& hash) {
    const auto* recipe = st.find_recipe(hash);
    if (!recipe) throw Error(ErrorCode::not_found, "unknown recipe " + hash.hex());
    if (recipe->status != RecordStatus::live)
        throw Error(ErrorCode::purged, "recipe " + hash.hex() + " was purged; it can never be built again");
    auto problems = check_recipe(st, *recipe);
    if (std::find(problems.begin(), problems.end(), problem::signature_invalid) != problems.end() ||
        std::find(problems.begin(), problems.end(), problem::content_hash_mismatch) != problems.end() ||
        std::find(problems.begin(), problems.end(), problem::record_digest_mismatch) != problems.end())
        throw Error(ErrorCode::signature_invalid, "recipe " + hash.hex() + " fails signature verification");
    return *recipe;
}

void require_trusted_parent(const LedgerState& st, const ImageId& parent) {
    auto reasons = evaluate_lineage(st, parent);
    if (!reasons.empty())
        throw Error(ErrorCode::parent_rejected,
                    "parent image " + parent.str() + " is not trusted (" + reasons.front().str() + ")");
}

std::string lowercase(std::string s) {
    std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::tolower(c); });
    return s;
}

} // namespace

MockBuild mock_build(std::string_view content, const std::optional<Digest>& parent_digest, std::string_view seed) {
    auto recipe = parse_recipe(content);
    std::string base = parent_digest ? parent_digest->hex() : recipe.from_text();
    MockBuild out{digest(std::string(content) + base + std::string(seed)), {}};
    for (std::size_t i = 0; i < recipe.steps.size(); ++i)
        out.step_digests.push_back(digest(recipe.steps[i] + std::to_string(i) + std::string(seed)));
    return out;
}

BuildOutput MockEngine::build(const BuildRequest& request) {
    auto mb = mock_build(request.recipe.content, request.parent_digest, seed_);
    return BuildOutput{mb.image_digest, std::move(mb.step_digests), "mock build of " + request.tag + "\n"};
}

BuildOutput ExecEngine::build(const BuildRequest& request) {
    ScratchDir scratch;
    auto recipe_path = scratch.path() / "Dockerfile";
    {
        std::ofstream out(recipe_path, std::ios::binary);
        out << engine_recipe_text(request);
        if (!out) throw Error(ErrorCode::engine, "cannot write recipe to scratch directory");
    }
    auto command = expand_template(template_, {{"recipe", recipe_path.string()},
                                               {"context", scratch.path().string()},
                                               {"tag", request.tag},
                                               {"parent", request.parent_image ? image_reference(*request.parent_image) : ""}});
    auto result = run_shell(command, true, scratch.path());
    if (result.exit_status != 0) {
        auto tail = result.output.size() > 400 ? result.output.substr(result.output.size() - 400) : result.output;
        throw Error(ErrorCode::engine, "build engine exited with status " + std::to_string(result.exit_status) +
                                           ": " + tail);
    }
    static const std::regex digest_re("sha256:([0-9a-f]{64})");
    std::optional<Digest> found;
    for (std::sregex_iterator it(result.output.begin(), result.output.end(), digest_re), end; it != end; ++it)
        found = Digest::from_hex((*it)[1].str());
    if (!found) throw Error(ErrorCode::engine, "build engine output did not contain an image digest");
    return BuildOutput{*found, {}, std::move(result.output)};
}

ImageRecord build(Ledger& ledger, const Digest& recipe_hash, BuildEngine& engine, const std::string& signer,
                  const PrivateKey& key) {
    ledger.refresh();
    const auto& st = ledger.state();
    const auto& recipe = require_buildable_recipe(st, recipe_hash);
    require_signer(st, signer, key);
    if (const auto* live = st.live_image_for(recipe_hash))
        throw Error(ErrorCode::rebuild_denied,
                    "recipe " + recipe_hash.hex() + " already has live image " + live->image_id.str() +
                        "; remove it before rebuilding");

    std::optional<Digest> parent_digest;
    std::optional<Timestamp> not_before;
    if (recipe.parent_image_id) {
        require_trusted_parent(st, *recipe.parent_image_id);
        const auto& parent = require_live_image(st, *recipe.parent_image_id);
        parent_digest = parent.image_digest;
        not_before = parent.built_at();
    }

    // Children are strictly younger than their parents, and ids of purged
    // images are never reused.
    auto& clock = ledger.clock();
    if (not_before) clock.wait_past(*not_before);
    ImageId id{clock.now(), recipe_hash};
    while (st.find_image(id) || (not_before && id.built_at <= *not_before)) {
        clock.wait_past(id.built_at);
        id.built_at = clock.now();
    }

    RecipeRecord recipe_copy = recipe;
    BuildRequest request{recipe_copy, parse_recipe(recipe_copy.content), parent_digest, recipe_copy.parent_image_id,
                         image_reference(id)};
    auto output = engine.build(request);

    auto writer = ledger.begin_write();
    const auto& fresh = writer.state();
    require_buildable_recipe(fresh, recipe_hash);
    require_signer(fresh, signer, key);
    if (const auto* live = fresh.live_image_for(recipe_hash))
        throw Error(ErrorCode::rebuild_denied,
                    "recipe " + recipe_hash.hex() + " gained live image " + live->image_id.str() + " during the build");
    if (recipe_copy.parent_image_id) require_trusted_parent(fresh, *recipe_copy.parent_image_id);

    ImageRecord image{id, recipe_copy.parent_image_id, output.image_digest, std::move(output.step_digests),
                      Signature{SignatureScheme::ed25519, {}, signer}, RecordStatus::live};
    image.signature = sign(image_signing_text(image), key, signer);
    return writer.put_image(image);
}

std::string_view to_string(DiffVerdict v) { return v == DiffVerdict::identical ? "identical" : "divergent"; }

nlohmann::json to_json(const DiffReport& r) {
    nlohmann::json steps = nlohmann::json::array();
    for (const auto& s : r.step_diffs)
        steps.push_back({{"index", s.index}, {"trusted", s.trusted.hex()}, {"rebuilt", s.rebuilt.hex()}});
    return {{"target_image_id", r.target_image_id.str()},
            {"quarantine_ref", r.quarantine_ref},
            {"trusted_digest", r.trusted_digest.hex()},
            {"rebuilt_digest", r.rebuilt_digest.hex()},
            {"digest_match", r.digest_match},
            {"step_diffs", steps},
            {"verdict", to_string(r.verdict)},
            {"at", format_timestamp(r.at)}};
}

std::string quarantine_reference(const ImageId& id) { return "spock-quarantine/" + lowercase(id.str()); }

DiffReport diff_rebuild(Ledger& ledger, const ImageId& image_id, BuildEngine& engine) {
    ledger.refresh();
    const auto& st = ledger.state();
    const ImageRecord trusted = require_live_image(st, image_id);
    const RecipeRecord recipe = require_buildable_recipe(st, image_id.recipe_hash);
    std::optional<Digest> parent_digest;
    if (recipe.parent_image_id) parent_digest = require_live_image(st, *recipe.parent_image_id).image_digest;

    BuildRequest request{recipe, parse_recipe(recipe.content), parent_digest, recipe.parent_image_id,
                         quarantine_reference(image_id)};
    auto output = engine.build(request);

    DiffReport report{image_id,
                      request.tag,
                      trusted.image_digest,
                      output.image_digest,
                      output.image_digest == trusted.image_digest,
                      {},
                      DiffVerdict::divergent,
                      ledger.clock().now()};
    // Steps are compared only where both sides report a digest.
    auto n = std::min(trusted.step_digests.size(), output.step_digests.size());
    for (std::size_t i = 0; i < n; ++i)
        if (trusted.step_digests[i] != output.step_digests[i])
            report.step_diffs.push_back({i, trusted.step_digests[i], output.step_digests[i]});
    report.verdict = report.digest_match && report.step_diffs.empty() ? DiffVerdict::identical : DiffVerdict::divergent;

    auto writer = ledger.begin_write();
    writer.put_audit({"diff", to_json(report)});
    return report;
}

} // namespace spock
