#include <spock/error.hpp>
#include <spock/provenance.hpp>

#include <algorithm>
#include <deque>
#include <set>

using nlohmann::json;

namespace spock {

namespace {

const RecipeRecord& recipe_of(const LedgerState& state, const NodeRef& node) {
    const Digest& hash = std::holds_alternative<Digest>(node) ? std::get<Digest>(node)
                                                              : std::get<ImageId>(node).recipe_hash;
    const auto* r = state.find_recipe(hash);
    if (!r) throw Error(ErrorCode::not_found, "unknown recipe " + hash.hex());
    if (const auto* id = std::get_if<ImageId>(&node); id && !state.find_image(*id))
        throw Error(ErrorCode::not_found, "unknown image " + id->str());
    return *r;
}

/// Image shown for a recipe node: the live one, else the newest.
std::optional<ImageId> representative_image(const LedgerState& state, const Digest& hash) {
    if (const auto* live = state.live_image_for(hash)) return live->image_id;
    auto all = state.images_of(hash);
    if (all.empty()) return std::nullopt;
    return all.back()->image_id;
}

LineageNode make_node(const LedgerState& state, const RecipeRecord& r, std::optional<ImageId> image) {
    LineageNode n{r.recipe_hash, image, r.signer_id(), r.kind, r.status, std::nullopt};
    if (image) {
        if (const auto* img = state.find_image(*image)) n.image_status = img->status;
    }
    return n;
}

void sort_recipes(const LedgerState& state, std::vector<Digest>& hashes) {
    std::sort(hashes.begin(), hashes.end(), [&](const Digest& a, const Digest& b) {
        const auto* ra = state.find_recipe(a);
        const auto* rb = state.find_recipe(b);
        return std::tie(ra->registered_at, a) < std::tie(rb->registered_at, b);
    });
}

} // namespace

std::string node_label(const NodeRef& node) {
    if (const auto* h = std::get_if<Digest>(&node)) return h->hex();
    return std::get<ImageId>(node).str();
}

NodeRef resolve_node(const LedgerState& state, std::string_view text) {
    if (text.rfind("trusted:", 0) == 0) text.remove_prefix(8);
    if (auto id = ImageId::try_parse(text)) {
        if (!state.find_image(*id)) throw Error(ErrorCode::not_found, "unknown image " + id->str());
        return *id;
    }
    if (auto hash = Digest::try_from_hex(text)) {
        if (!state.find_recipe(*hash)) throw Error(ErrorCode::not_found, "unknown recipe " + hash->hex());
        return *hash;
    }
    bool hex = !text.empty() && std::all_of(text.begin(), text.end(), [](char c) {
        return (c >= '0' && c <= '9') || (c >= 'a' && c <= 'f');
    });
    if (!hex || text.size() < 4)
        throw Error(ErrorCode::not_found, "'" + std::string(text) + "' is not a recipe hash (prefix) or image id");
    std::vector<Digest> matches;
    for (const auto& [hash, r] : state.recipes)
        if (hash.hex().rfind(text, 0) == 0) matches.push_back(hash);
    if (matches.empty()) throw Error(ErrorCode::not_found, "no recipe matches '" + std::string(text) + "'");
    if (matches.size() > 1) throw Error(ErrorCode::ambiguous, "prefix '" + std::string(text) + "' is ambiguous");
    return matches.front();
}

LineagePath lineage(const LedgerState& state, const NodeRef& node) {
    const auto& target = recipe_of(state, node);
    std::optional<ImageId> target_image = std::holds_alternative<ImageId>(node)
                                              ? std::optional<ImageId>(std::get<ImageId>(node))
                                              : representative_image(state, target.recipe_hash);
    LineagePath path{make_node(state, target, target_image)};
    std::set<Digest> seen{target.recipe_hash};
    auto parent = target.parent_image_id;
    while (parent) {
        const auto* r = state.find_recipe(parent->recipe_hash);
        if (!r) throw Error(ErrorCode::integrity, "lineage references unknown recipe " + parent->recipe_hash.hex());
        if (!seen.insert(r->recipe_hash).second)
            throw Error(ErrorCode::integrity, "lineage cycle at " + r->recipe_hash.hex());
        path.push_back(make_node(state, *r, parent));
        parent = r->parent_image_id;
    }
    std::reverse(path.begin(), path.end());
    return path;
}

std::string format_lineage(const LineagePath& path) {
    std::string out;
    for (const auto& n : path) {
        if (!out.empty()) out += " -> ";
        out += n.recipe_hash.prefix();
    }
    return out;
}

std::vector<Digest> children(const LedgerState& state, const NodeRef& node) {
    const auto& r = recipe_of(state, node);
    const auto* image = std::get_if<ImageId>(&node);
    std::vector<Digest> out;
    for (const auto& [hash, child] : state.recipes) {
        if (!child.parent_image_id) continue;
        if (image ? *child.parent_image_id == *image : child.parent_image_id->recipe_hash == r.recipe_hash)
            out.push_back(hash);
    }
    sort_recipes(state, out);
    return out;
}

std::vector<Digest> descendants(const LedgerState& state, const NodeRef& node) {
    std::set<Digest> seen;
    std::deque<Digest> queue;
    for (auto& c : children(state, node)) queue.push_back(c);
    while (!queue.empty()) {
        auto h = queue.front();
        queue.pop_front();
        if (!seen.insert(h).second) continue;
        for (auto& c : children(state, h)) queue.push_back(c);
    }
    std::vector<Digest> out(seen.begin(), seen.end());
    sort_recipes(state, out);
    return out;
}

std::string show_content(const LedgerState& state, const NodeRef& node, bool with_lineage) {
    if (!with_lineage) return recipe_of(state, node).content;
    std::string out;
    for (const auto& n : lineage(state, node)) {
        const auto& r = *state.find_recipe(n.recipe_hash);
        out += "### " + std::string(n.recipe_hash.prefix()) + " " + std::string(to_string(n.kind)) +
               " signer=" + n.signer_id + " status=" + std::string(to_string(n.recipe_status));
        if (n.image_id) out += " image=" + n.image_id->str();
        out += "\n";
        out += r.content;
        if (!r.content.empty() && r.content.back() != '\n') out += "\n";
    }
    return out;
}

Forest forest_of(const LedgerState& state) {
    Forest f;
    for (const auto* r : state.list_recipes()) {
        ForestNode n{r->recipe_hash.hex(), std::string(to_string(r->kind)), std::string(to_string(r->status)),
                     r->signer_id(), std::nullopt, {}};
        if (r->parent_image_id) {
            n.parent_image = r->parent_image_id->str();
            f.edges.push_back({r->parent_image_id->recipe_hash.hex(), r->recipe_hash.hex(), r->parent_image_id->str()});
        }
        for (const auto* img : state.images_of(r->recipe_hash))
            n.images.push_back({img->image_id.str(), std::string(to_string(img->status)), img->image_digest.hex()});
        f.nodes.push_back(std::move(n));
    }
    return f;
}

std::string render_json(const Forest& f) {
    json nodes = json::array(), edges = json::array();
    for (const auto& n : f.nodes) {
        json images = json::array();
        for (const auto& i : n.images) images.push_back({{"id", i.id}, {"status", i.status}, {"digest", i.digest}});
        nodes.push_back({{"hash", n.hash},
                         {"kind", n.kind},
                         {"status", n.status},
                         {"signer", n.signer},
                         {"parent_image", n.parent_image ? json(*n.parent_image) : json(nullptr)},
                         {"images", images}});
    }
    for (const auto& e : f.edges) edges.push_back({{"from", e.from}, {"to", e.to}, {"image", e.image}});
    return json{{"version", tree_schema_version}, {"nodes", nodes}, {"edges", edges}}.dump(2) + "\n";
}

std::string render_dot(const Forest& f) {
    std::string out = "digraph spock {\n  node [shape=box];\n";
    for (const auto& n : f.nodes) {
        auto p = n.hash.substr(0, 12);
        bool live = n.status == "live";
        out += "  \"" + p + "\" [label=\"" + p + " (" + n.kind + ")\\n" + n.signer + "\"" +
               (live ? " style=solid color=black" : " style=dashed color=red fontcolor=red") + "];\n";
    }
    for (const auto& e : f.edges) out += "  \"" + e.from.substr(0, 12) + "\" -> \"" + e.to.substr(0, 12) + "\";\n";
    out += "}\n";
    return out;
}

std::string export_tree(const LedgerState& state, TreeFormat format) {
    auto f = forest_of(state);
    return format == TreeFormat::json ? render_json(f) : render_dot(f);
}

Forest import_tree_json(std::string_view text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& ex) {
        throw Error(ErrorCode::parse, std::string("tree JSON: ") + ex.what());
    }
    if (j.value("version", 0) != tree_schema_version) throw Error(ErrorCode::parse, "unsupported tree JSON version");
    Forest f;
    try {
        for (const auto& n : j.at("nodes")) {
            ForestNode node{n.at("hash").get<std::string>(), n.at("kind").get<std::string>(),
                            n.at("status").get<std::string>(), n.at("signer").get<std::string>(), std::nullopt, {}};
            if (!n.at("parent_image").is_null()) node.parent_image = n.at("parent_image").get<std::string>();
            for (const auto& i : n.at("images"))
                node.images.push_back({i.at("id").get<std::string>(), i.at("status").get<std::string>(),
                                       i.at("digest").get<std::string>()});
            f.nodes.push_back(std::move(node));
        }
        for (const auto& e : j.at("edges"))
            f.edges.push_back({e.at("from").get<std::string>(), e.at("to").get<std::string>(),
                               e.at("image").get<std::string>()});
    } catch (const json::exception& ex) {
        throw Error(ErrorCode::parse, std::string("tree JSON: ") + ex.what());
    }
    return f;
}

} // namespace spock
