#pragma once

#include <spock/clock.hpp>
#include <spock/crypto.hpp>

#include <nlohmann/json.hpp>

#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace spock {

inline constexpr int ledger_schema_version = 1;

enum class RecordStatus { live, purged };
enum class EntityStatus { trusted, distrusted };
enum class RecipeKind { root, child };

std::string_view to_string(RecordStatus s);
std::string_view to_string(EntityStatus s);
std::string_view to_string(RecipeKind k);
RecordStatus record_status_from(std::string_view s);
RecipeKind recipe_kind_from(std::string_view s);

/// "<built_at>-<recipe_hash>", e.g. "20181001T120000Z-ba7816bf...".
struct ImageId {
    Timestamp built_at;
    Digest recipe_hash;

    std::string str() const;
    static ImageId parse(std::string_view text);
    static std::optional<ImageId> try_parse(std::string_view text);

    auto operator<=>(const ImageId&) const = default;
};

struct TrustedEntity {
    std::string entity_id;
    PublicKey public_key;
    EntityStatus status = EntityStatus::trusted;
    Timestamp added_at;
};

struct RecipeRecord {
    Digest recipe_hash;
    RecipeKind kind;
    std::string content;
    Signature signature;
    std::optional<ImageId> parent_image_id;
    RecordStatus status = RecordStatus::live;
    Timestamp registered_at;

    const std::string& signer_id() const { return signature.signer_id; }
};

struct ImageRecord {
    ImageId image_id;
    std::optional<ImageId> parent_image_id;
    Digest image_digest;
    // Empty when the engine does not report per-step digests.
    std::vector<Digest> step_digests;
    Signature signature;
    RecordStatus status = RecordStatus::live;

    const Digest& recipe_hash() const { return image_id.recipe_hash; }
    const std::string& signer_id() const { return signature.signer_id; }
    Timestamp built_at() const { return image_id.built_at; }
};

/// Canonical text an image signature covers.
std::string image_signing_text(const ImageRecord& image);

/// One atomic status transition: entities distrusted and records purged
/// together, with the archive bundle that captured them.
struct RevokeEvent {
    Digest bundle_id;
    Timestamp at;
    std::string reason;
    std::vector<std::string> distrusted;
    std::vector<Digest> recipes;
    std::vector<ImageId> images;
};

struct AuditEvent {
    std::string type;  // "diff" or "admission"
    nlohmann::json body;
};

/// A complete line of ledger.log: "<record-digest> <record-type> <canonical-json>".
struct LogLine {
    std::size_t number = 0;  // 1-based
    std::string stated_digest;
    std::string type;
    std::string payload;
    bool digest_ok = false;
};

struct LoadIssue {
    std::size_t line = 0;
    std::string what;
};

/// In-memory replay of ledger.log.
class LedgerState {
public:
    int schema_version = 0;
    std::map<std::string, TrustedEntity> entities;
    std::map<Digest, RecipeRecord> recipes;
    std::map<ImageId, ImageRecord> images;
    std::vector<RevokeEvent> revocations;
    std::vector<AuditEvent> audit;
    std::vector<LogLine> lines;
    std::vector<LoadIssue> issues;
    // Record key ("entity:<id>", "recipe:<hash>", "image:<id>") -> index into lines.
    std::map<std::string, std::size_t> origin;

    const TrustedEntity* find_entity(std::string_view id) const;
    const RecipeRecord* find_recipe(const Digest& hash) const;
    const ImageRecord* find_image(const ImageId& id) const;
    const ImageRecord* live_image_for(const Digest& recipe_hash) const;
    std::vector<const ImageRecord*> images_of(const Digest& recipe_hash) const;
    const LogLine* line_of(const std::string& record_key) const;
    bool is_trusted(std::string_view entity_id) const;

    /// Digest over every complete log line; changes iff the log changes.
    Digest state_digest() const;

    // Deterministic listings.
    std::vector<const TrustedEntity*> list_entities() const;
    struct RecipeFilter {
        std::optional<RecipeKind> kind;
        std::optional<RecordStatus> status;
        std::optional<std::string> signer;
    };
    std::vector<const RecipeRecord*> list_recipes(const RecipeFilter& filter = {}) const;
    std::vector<const ImageRecord*> list_images(std::optional<RecordStatus> status = {}) const;

    void apply(LogLine line);
};

std::string entity_key(std::string_view id);
std::string recipe_key(const Digest& hash);
std::string image_key(const ImageId& id);

// Canonical JSON forms, as they appear in the log and in archive bundles.
nlohmann::json to_json(const TrustedEntity& e);
nlohmann::json to_json(const RecipeRecord& r);
nlohmann::json to_json(const ImageRecord& i);
nlohmann::json to_json(const RevokeEvent& ev);
TrustedEntity entity_from_json(const nlohmann::json& j);
RecipeRecord recipe_from_json(const nlohmann::json& j);
ImageRecord image_from_json(const nlohmann::json& j);
RevokeEvent revoke_from_json(const nlohmann::json& j);

/// Serializes a log line (including the trailing newline).
std::string format_log_line(std::string_view type, const nlohmann::json& body);

struct LedgerOptions {
    std::shared_ptr<Clock> clock = system_clock();
    /// Called at named points inside mutating operations; tests use it to
    /// inject crashes.
    std::function<void(std::string_view)> fault_hook;
};

class Ledger {
public:
    /// Creates a new ledger at `dir`, which must be absent or an empty directory.
    static Ledger init(const std::filesystem::path& dir, LedgerOptions options = {});
    static Ledger open(const std::filesystem::path& dir, LedgerOptions options = {});

    Ledger(Ledger&&) noexcept;
    Ledger& operator=(Ledger&&) noexcept;
    ~Ledger();

    const std::filesystem::path& dir() const { return dir_; }
    std::filesystem::path log_path() const { return dir_ / "ledger.log"; }
    std::filesystem::path archive_dir() const { return dir_ / "archive"; }
    std::filesystem::path keys_dir() const { return dir_ / "keys"; }
    std::filesystem::path index_dir() const { return dir_ / "index"; }

    const LedgerState& state() const { return *state_; }
    /// Re-reads the log under a shared lock.
    void refresh();

    Clock& clock() const { return *options_.clock; }
    void fault_point(std::string_view name) const;

    /// Actions taken by crash recovery at the start of the last write.
    const std::vector<std::string>& recovery_log() const { return recovery_log_; }

    /// Exclusive write session. Holds the directory lock from construction to
    /// destruction; the state is re-read after the lock is taken so every
    /// precondition can be checked against the latest log.
    class Writer {
    public:
        Writer(Writer&&) noexcept;
        Writer& operator=(Writer&&) = delete;
        ~Writer();

        const LedgerState& state() const { return ledger_->state(); }
        Ledger& ledger() { return *ledger_; }

        // Integrity-checked record insertion.
        const TrustedEntity& put_entity(const std::string& entity_id, const PublicKey& key);
        const RecipeRecord& put_recipe(const RecipeRecord& recipe);
        const ImageRecord& put_image(const ImageRecord& image);
        void put_revoke(const RevokeEvent& ev);
        void put_audit(const AuditEvent& ev);

        /// Unchecked append of a raw record.
        void append(std::string_view type, const nlohmann::json& body);

    private:
        friend class Ledger;
        explicit Writer(Ledger& ledger);
        Ledger* ledger_;
        int lock_fd_ = -1;
    };

    Writer begin_write();

private:
    Ledger(std::filesystem::path dir, LedgerOptions options);
    void load();
    void recover();
    void write_index() const;

    std::filesystem::path dir_;
    LedgerOptions options_;
    std::unique_ptr<LedgerState> state_;
    std::vector<std::string> recovery_log_;
};

/// Registers a new trusted entity; throws duplicate_entity if the id exists.
TrustedEntity add_entity(Ledger& ledger, const std::string& entity_id, const PublicKey& key);

struct ValidationEntry {
    std::string record_type;  // entity | recipe | image | schema | revoke | diff | admission | line
    std::string id;
    std::vector<std::string> problems;  // empty iff the record passes

    bool ok() const { return problems.empty(); }
};

struct ValidationReport {
    std::vector<ValidationEntry> entries;
    bool ok() const;
    std::vector<const ValidationEntry*> failures() const;
};

// Problem codes shared by validation and the run gate.
namespace problem {
inline constexpr std::string_view record_digest_mismatch = "record-digest-mismatch";
inline constexpr std::string_view signature_invalid = "signature-invalid";
inline constexpr std::string_view content_hash_mismatch = "content-hash-mismatch";
inline constexpr std::string_view unknown_signer = "unknown-signer";
inline constexpr std::string_view signer_distrusted = "signer-distrusted";
inline constexpr std::string_view unknown_parent = "unknown-parent";
inline constexpr std::string_view unknown_recipe = "unknown-recipe";
inline constexpr std::string_view parent_mismatch = "parent-mismatch";
inline constexpr std::string_view kind_mismatch = "kind-parent-mismatch";
inline constexpr std::string_view dangling_reference = "live-record-references-purged";
inline constexpr std::string_view unreadable = "unreadable-line";
} // namespace problem

std::vector<std::string> check_entity(const LedgerState& state, const TrustedEntity& entity);
std::vector<std::string> check_recipe(const LedgerState& state, const RecipeRecord& recipe);
std::vector<std::string> check_image(const LedgerState& state, const ImageRecord& image);

ValidationReport validate_all(const LedgerState& state);

} // namespace spock
