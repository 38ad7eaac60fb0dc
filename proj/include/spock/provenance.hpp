#pragma once

#include <spock/ledger.hpp>

#include <optional>
#include <string>
#include <variant>
#include <vector>

namespace spock {

/// A node of the provenance forest: a recipe, or one image of a recipe.
using NodeRef = std::variant<Digest, ImageId>;

std::string node_label(const NodeRef& node);

/// Accepts a full image id (optionally "trusted:"-prefixed), a full recipe
/// hash, or a unique recipe-hash prefix of at least 4 hex characters.
NodeRef resolve_node(const LedgerState& state, std::string_view text);

struct LineageNode {
    Digest recipe_hash;
    std::optional<ImageId> image_id;
    std::string signer_id;
    RecipeKind kind;
    RecordStatus recipe_status;
    std::optional<RecordStatus> image_status;

    bool purged() const {
        return recipe_status == RecordStatus::purged || image_status == RecordStatus::purged;
    }
};

/// Root first, target last. Purged ancestors are included and flagged.
using LineagePath = std::vector<LineageNode>;

LineagePath lineage(const LedgerState& state, const NodeRef& node);

/// "<prefix> -> <prefix> -> ..." using 12-character recipe hash prefixes.
std::string format_lineage(const LineagePath& path);

/// Direct child recipes, ordered by registration time then hash.
std::vector<Digest> children(const LedgerState& state, const NodeRef& node);

/// Transitive closure of children (excluding the node itself), same order.
std::vector<Digest> descendants(const LedgerState& state, const NodeRef& node);

std::string show_content(const LedgerState& state, const NodeRef& node, bool with_lineage);

struct ForestImage {
    std::string id;
    std::string status;
    std::string digest;
    bool operator==(const ForestImage&) const = default;
    auto operator<=>(const ForestImage&) const = default;
};

struct ForestNode {
    std::string hash;
    std::string kind;
    std::string status;
    std::string signer;
    std::optional<std::string> parent_image;
    std::vector<ForestImage> images;
    bool operator==(const ForestNode&) const = default;
    auto operator<=>(const ForestNode&) const = default;
};

struct ForestEdge {
    std::string from;   // parent recipe hash
    std::string to;     // child recipe hash
    std::string image;  // parent image id the child builds FROM
    bool operator==(const ForestEdge&) const = default;
    auto operator<=>(const ForestEdge&) const = default;
};

struct Forest {
    std::vector<ForestNode> nodes;
    std::vector<ForestEdge> edges;
};

enum class TreeFormat { json, dot };

Forest forest_of(const LedgerState& state);
std::string export_tree(const LedgerState& state, TreeFormat format);
std::string render_json(const Forest& forest);
std::string render_dot(const Forest& forest);
Forest import_tree_json(std::string_view text);

inline constexpr int tree_schema_version = 1;

} // namespace spock
