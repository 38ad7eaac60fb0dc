#pragma once

#include <spock/ledger.hpp>
#include <spock/recipe.hpp>

#include <optional>
#include <string>
#include <vector>

namespace spock {

struct BuildRequest {
    const RecipeRecord& recipe;
    Recipe parsed;
    std::optional<Digest> parent_digest;   // image digest of the parent, for children
    std::optional<ImageId> parent_image;
    std::string tag;                       // engine-side reference to build into
};

struct BuildOutput {
    Digest image_digest;
    std::vector<Digest> step_digests;      // empty when the engine cannot report them
    std::string engine_log;
};

class BuildEngine {
public:
    virtual ~BuildEngine() = default;
    virtual std::string name() const = 0;
    /// Throws Error(engine) on failure.
    virtual BuildOutput build(const BuildRequest& request) = 0;
};

struct MockBuild {
    Digest image_digest;
    std::vector<Digest> step_digests;
};

/// image_digest = sha256(content || parent digest hex, or the external FROM reference || seed)
/// step_digests[i] = sha256(step line || decimal i || seed)
MockBuild mock_build(std::string_view content, const std::optional<Digest>& parent_digest,
                     std::string_view seed);

/// Deterministic engine for tests and dry runs.
class MockEngine final : public BuildEngine {
public:
    explicit MockEngine(std::string seed = "spock") : seed_(std::move(seed)) {}
    std::string name() const override { return "mock"; }
    BuildOutput build(const BuildRequest& request) override;
    const std::string& seed() const { return seed_; }

private:
    std::string seed_;
};

/// Runs an external OCI builder. The template may use {recipe}, {context},
/// {tag} and {parent}; the recipe is written to a scratch directory with a
/// child's "FROM trusted:<id>" rewritten to the parent's engine reference.
/// The last "sha256:<hex>" in the output is taken as the image digest.
class ExecEngine final : public BuildEngine {
public:
    explicit ExecEngine(std::string command_template) : template_(std::move(command_template)) {}
    std::string name() const override { return "exec"; }
    BuildOutput build(const BuildRequest& request) override;

    static constexpr const char* default_template = "docker build --quiet -t {tag} -f {recipe} {context}";

private:
    std::string template_;
};

/// Builds a live recipe into a new signed image. Throws rebuild_denied if the
/// recipe already has a live image; nothing is stored when the engine fails.
ImageRecord build(Ledger& ledger, const Digest& recipe_hash, BuildEngine& engine,
                  const std::string& signer, const PrivateKey& key);

enum class DiffVerdict { identical, divergent };
std::string_view to_string(DiffVerdict v);

struct StepDiff {
    std::size_t index;
    Digest trusted;
    Digest rebuilt;
};

struct DiffReport {
    ImageId target_image_id;
    std::string quarantine_ref;
    Digest trusted_digest;
    Digest rebuilt_digest;
    bool digest_match = false;
    std::vector<StepDiff> step_diffs;
    DiffVerdict verdict = DiffVerdict::divergent;
    Timestamp at;
};

nlohmann::json to_json(const DiffReport& report);

/// Rebuilds a live image into the quarantine namespace and compares it with
/// the trusted artifact. Record statuses are untouched; the report is
/// appended to the audit history.
DiffReport diff_rebuild(Ledger& ledger, const ImageId& image_id, BuildEngine& engine);

/// "spock-quarantine/<image id, lowercased>"
std::string quarantine_reference(const ImageId& id);

} // namespace spock
