#pragma once

#include <spock/ledger.hpp>
#include <spock/provenance.hpp>

#include <string>
#include <vector>

namespace spock {

struct ManifestItem {
    std::string type;  // recipe | recipe-content | image | entity
    std::string id;
    Digest digest;     // of the item file's bytes
    std::string file;
};

/// Forensic capture of everything one revocation purged. Lives under
/// archive/<bundle_id>/ as manifest.json plus one file per item.
struct ArchiveBundle {
    Digest bundle_id;  // digest of the manifest without its bundle_id key
    Timestamp created_at;
    std::string reason;
    std::vector<std::string> distrusted;
    std::vector<RecipeRecord> removed_recipes;
    std::vector<ImageRecord> removed_images;
    std::vector<TrustedEntity> signers;  // key snapshots for re-verification
    std::vector<ManifestItem> items;
};

nlohmann::json manifest_json(const ArchiveBundle& bundle);

/// Purges `node` and its dependent closure in one atomic event. Removing a
/// recipe purges the recipe, its images and every descendant; removing an
/// image leaves its recipe live so it can be rebuilt.
ArchiveBundle remove(Ledger& ledger, const NodeRef& node, const std::string& reason);

/// Distrusts the entity and purges every live record it signed together
/// with each record's dependent closure.
ArchiveBundle distrust(Ledger& ledger, const std::string& entity_id, const std::string& reason);

struct ArchiveSummary {
    Digest bundle_id;
    Timestamp created_at;
    std::string reason;
    std::size_t recipes = 0;
    std::size_t images = 0;
    std::vector<std::string> distrusted;
};

std::vector<ArchiveSummary> list_archives(const LedgerState& state);

/// Reads a committed bundle and verifies it against its manifest, its own
/// signatures and the revoke event that committed it. Accepts a unique
/// prefix of the bundle id. Throws Error(integrity) on any mismatch.
ArchiveBundle open_archive(const Ledger& ledger, std::string_view bundle_id);

/// The purge set remove() would produce, without side effects.
struct Closure {
    std::vector<Digest> recipes;
    std::vector<ImageId> images;
};
Closure removal_closure(const LedgerState& state, const NodeRef& node);

} // namespace spock
