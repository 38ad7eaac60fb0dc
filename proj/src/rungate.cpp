#include <spock/error.hpp>
#include <spock/process.hpp>
#include <spock/rungate.hpp>

#include <algorithm>
#include <cctype>
#include <set>

namespace spock {

namespace {

bool has(const std::vector<std::string>& problems, std::string_view p) {
    return std::find(problems.begin(), problems.end(), p) != problems.end();
}

bool tampered(const std::vector<std::string>& problems) {
    return has(problems, problem::signature_invalid) || has(problems, problem::record_digest_mismatch) ||
           has(problems, problem::content_hash_mismatch);
}

bool structurally_broken(const std::vector<std::string>& problems) {
    return has(problems, problem::unknown_parent) || has(problems, problem::unknown_recipe) ||
           has(problems, problem::parent_mismatch) || has(problems, problem::kind_mismatch);
}

class ReasonList {
public:
    void add(std::string_view code, std::string subject) {
        DenyReason r{std::string(code), std::move(subject)};
        if (std::find(reasons_.begin(), reasons_.end(), r) == reasons_.end()) reasons_.push_back(std::move(r));
    }
    std::vector<DenyReason> take() { return std::move(reasons_); }

private:
    std::vector<DenyReason> reasons_;
};

void check_signer(const LedgerState& state, const std::string& signer, ReasonList& out) {
    const auto* entity = state.find_entity(signer);
    if (!entity) {
        out.add(deny_code::signer_untrusted, "entity " + signer + " (unknown)");
        return;
    }
    if (entity->status != EntityStatus::trusted) out.add(deny_code::signer_untrusted, "entity " + signer);
    if (tampered(check_entity(state, *entity))) out.add(deny_code::signature_invalid, "entity " + signer);
}

} // namespace

std::string_view to_string(Verdict v) { return v == Verdict::allow ? "allow" : "deny"; }

nlohmann::json to_json(const AdmissionDecision& d) {
    nlohmann::json reasons = nlohmann::json::array();
    for (const auto& r : d.reasons) reasons.push_back({{"code", r.code}, {"subject", r.subject}});
    return {{"image_id", d.image_id},
            {"verdict", to_string(d.verdict)},
            {"reasons", reasons},
            {"checked_at", format_timestamp(d.checked_at)}};
}

std::vector<DenyReason> evaluate_lineage(const LedgerState& state, const ImageId& target) {
    ReasonList out;
    std::set<ImageId> visited;
    std::optional<ImageId> cursor = target;
    while (cursor) {
        const ImageId id = *cursor;
        cursor.reset();
        if (!visited.insert(id).second) {
            out.add(deny_code::integrity, "image " + id.str() + " (lineage cycle)");
            break;
        }
        const auto* img = state.find_image(id);
        if (!img) {
            out.add(id == target ? deny_code::unknown_image : deny_code::integrity, "image " + id.str());
            break;
        }
        auto img_problems = check_image(state, *img);
        if (img->status != RecordStatus::live) out.add(deny_code::purged, "image " + id.str());
        if (tampered(img_problems)) out.add(deny_code::signature_invalid, "image " + id.str());
        if (structurally_broken(img_problems)) out.add(deny_code::integrity, "image " + id.str());
        check_signer(state, img->signer_id(), out);

        const auto* recipe = state.find_recipe(id.recipe_hash);
        if (!recipe) {
            out.add(deny_code::integrity, "recipe " + id.recipe_hash.hex() + " (missing)");
            break;
        }
        auto recipe_problems = check_recipe(state, *recipe);
        if (recipe->status != RecordStatus::live) out.add(deny_code::purged, "recipe " + recipe->recipe_hash.hex());
        if (tampered(recipe_problems)) out.add(deny_code::signature_invalid, "recipe " + recipe->recipe_hash.hex());
        if (structurally_broken(recipe_problems)) out.add(deny_code::integrity, "recipe " + recipe->recipe_hash.hex());
        check_signer(state, recipe->signer_id(), out);

        cursor = recipe->parent_image_id;
    }
    return out.take();
}

AdmissionDecision check_runnable(Ledger& ledger, std::string_view image_id) {
    auto writer = ledger.begin_write();
    AdmissionDecision decision{std::string(image_id), Verdict::deny, {}, ledger.clock().now()};
    if (auto id = ImageId::try_parse(image_id)) {
        decision.reasons = evaluate_lineage(writer.state(), *id);
    } else {
        decision.reasons.push_back({std::string(deny_code::unknown_image), "malformed image id " + std::string(image_id)});
    }
    decision.verdict = decision.reasons.empty() ? Verdict::allow : Verdict::deny;
    writer.put_audit({"admission", to_json(decision)});
    return decision;
}

std::string image_reference(const ImageId& id) {
    auto s = id.str();
    std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::tolower(c); });
    return "spock/" + s;
}

RunResult run_image(Ledger& ledger, std::string_view image_id, const std::string& command_template) {
    RunResult result{check_runnable(ledger, image_id), false, run_denied_status};
    if (!result.decision.allowed()) return result;
    auto id = ImageId::parse(image_id);
    auto command = expand_template(command_template, {{"image", image_reference(id)}, {"image_id", id.str()}});
    result.spawned = true;
    result.exit_status = run_shell(command, false).exit_status;
    return result;
}

} // namespace spock
