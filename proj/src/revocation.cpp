#include <spock/error.hpp>
#include <spock/revocation.hpp>

#include <fcntl.h>
#include <unistd.h>

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>

namespace fs = std::filesystem;
using nlohmann::json;

namespace spock {

namespace {

void write_synced(const fs::path& path, std::string_view data) {
    int fd = ::open(path.c_str(), O_WRONLY | O_CREAT | O_TRUNC | O_CLOEXEC, 0644);
    if (fd < 0) throw Error(ErrorCode::io, "cannot create " + path.string());
    bool ok = ::write(fd, data.data(), data.size()) == static_cast<ssize_t>(data.size());
    ok = ::fsync(fd) == 0 && ok;
    ::close(fd);
    if (!ok) throw Error(ErrorCode::io, "cannot write " + path.string());
}

std::string read_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorCode::integrity, "bundle file missing: " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void add_recipe_closure(const LedgerState& st, const Digest& root, std::set<Digest>& recipes) {
    recipes.insert(root);
    for (const auto& d : descendants(st, root)) recipes.insert(d);
}

void merge(const Closure& c, std::set<Digest>& recipes, std::set<ImageId>& images) {
    recipes.insert(c.recipes.begin(), c.recipes.end());
    images.insert(c.images.begin(), c.images.end());
}

Closure finish(const LedgerState& st, const std::set<Digest>& recipe_set, std::set<ImageId> image_set) {
    Closure c;
    for (const auto& h : recipe_set) {
        const auto* r = st.find_recipe(h);
        if (r && r->status == RecordStatus::live) c.recipes.push_back(h);
        for (const auto* img : st.images_of(h)) image_set.insert(img->image_id);
    }
    for (const auto& id : image_set) {
        const auto* img = st.find_image(id);
        if (img && img->status == RecordStatus::live) c.images.push_back(id);
    }
    return c;
}

json bundle_body(const ArchiveBundle& b) {
    json items = json::array();
    for (const auto& i : b.items)
        items.push_back({{"type", i.type}, {"id", i.id}, {"digest", i.digest.hex()}, {"file", i.file}});
    return {{"created_at", format_timestamp(b.created_at)},
            {"reason", b.reason},
            {"distrusted", b.distrusted},
            {"items", items}};
}

std::string safe_name(std::string s) {
    for (auto& c : s)
        if (c == '/' || c == ':') c = '_';
    return s;
}

ArchiveBundle commit_revocation(Ledger::Writer& writer, const Closure& closure, std::vector<std::string> distrusted,
                                const std::string& reason) {
    auto& ledger = writer.ledger();
    const auto& st = writer.state();
    ArchiveBundle bundle{digest(""), ledger.clock().now(), reason, std::move(distrusted), {}, {}, {}, {}};

    std::map<std::string, std::string> files;  // name -> bytes
    std::set<std::string> signer_ids(bundle.distrusted.begin(), bundle.distrusted.end());
    auto add_item = [&](std::string type, std::string id, std::string file, std::string bytes) {
        bundle.items.push_back({std::move(type), std::move(id), digest(bytes), file});
        files[file] = std::move(bytes);
    };
    for (const auto& h : closure.recipes) {
        const auto& r = *st.find_recipe(h);
        bundle.removed_recipes.push_back(r);
        bundle.removed_recipes.back().status = RecordStatus::purged;
        signer_ids.insert(r.signer_id());
        add_item("recipe", h.hex(), "recipe-" + h.hex() + ".json", st.line_of(recipe_key(h))->payload);
        add_item("recipe-content", h.hex(), "recipe-" + h.hex() + ".txt", r.content);
    }
    for (const auto& id : closure.images) {
        const auto& img = *st.find_image(id);
        bundle.removed_images.push_back(img);
        bundle.removed_images.back().status = RecordStatus::purged;
        signer_ids.insert(img.signer_id());
        add_item("image", id.str(), "image-" + id.str() + ".json", st.line_of(image_key(id))->payload);
    }
    for (const auto& s : signer_ids) {
        if (const auto* e = st.find_entity(s)) {
            bundle.signers.push_back(*e);
            if (std::find(bundle.distrusted.begin(), bundle.distrusted.end(), s) != bundle.distrusted.end())
                bundle.signers.back().status = EntityStatus::distrusted;
            add_item("entity", s, "entity-" + safe_name(s) + ".json", st.line_of(entity_key(s))->payload);
        }
    }
    bundle.bundle_id = digest(bundle_body(bundle).dump());

    auto final_dir = ledger.archive_dir() / bundle.bundle_id.hex();
    auto tmp_dir = ledger.archive_dir() / (".tmp-" + bundle.bundle_id.hex());
    fs::create_directories(tmp_dir);
    for (const auto& [name, bytes] : files) write_synced(tmp_dir / name, bytes);
    write_synced(tmp_dir / "manifest.json", manifest_json(bundle).dump(2) + "\n");
    fs::rename(tmp_dir, final_dir);
    ledger.fault_point("revoke:bundle-written");

    RevokeEvent ev{bundle.bundle_id, bundle.created_at, reason, bundle.distrusted, closure.recipes, closure.images};
    writer.put_revoke(ev);
    ledger.fault_point("revoke:committed");
    return bundle;
}

} // namespace

json manifest_json(const ArchiveBundle& bundle) {
    auto j = bundle_body(bundle);
    j["bundle_id"] = bundle.bundle_id.hex();
    return j;
}

Closure removal_closure(const LedgerState& st, const NodeRef& node) {
    std::set<Digest> recipes;
    std::set<ImageId> images;
    if (const auto* h = std::get_if<Digest>(&node)) {
        add_recipe_closure(st, *h, recipes);
    } else {
        const auto& id = std::get<ImageId>(node);
        images.insert(id);
        for (const auto& d : descendants(st, id)) recipes.insert(d);
    }
    return finish(st, recipes, std::move(images));
}

ArchiveBundle remove(Ledger& ledger, const NodeRef& node, const std::string& reason) {
    auto writer = ledger.begin_write();
    const auto& st = writer.state();
    if (const auto* h = std::get_if<Digest>(&node)) {
        const auto* r = st.find_recipe(*h);
        if (!r) throw Error(ErrorCode::not_found, "unknown recipe " + h->hex());
        if (r->status != RecordStatus::live) throw Error(ErrorCode::already_purged, "recipe " + h->hex() + " is already purged");
    } else {
        const auto& id = std::get<ImageId>(node);
        const auto* img = st.find_image(id);
        if (!img) throw Error(ErrorCode::not_found, "unknown image " + id.str());
        if (img->status != RecordStatus::live) throw Error(ErrorCode::already_purged, "image " + id.str() + " is already purged");
    }
    return commit_revocation(writer, removal_closure(st, node), {}, reason);
}

ArchiveBundle distrust(Ledger& ledger, const std::string& entity_id, const std::string& reason) {
    auto writer = ledger.begin_write();
    const auto& st = writer.state();
    const auto* entity = st.find_entity(entity_id);
    if (!entity) throw Error(ErrorCode::not_found, "unknown entity '" + entity_id + "'");
    if (entity->status != EntityStatus::trusted)
        throw Error(ErrorCode::already_distrusted, "entity '" + entity_id + "' is already distrusted");

    std::set<Digest> recipes;
    std::set<ImageId> images;
    for (const auto& [h, r] : st.recipes)
        if (r.status == RecordStatus::live && r.signer_id() == entity_id)
            merge(removal_closure(st, h), recipes, images);
    for (const auto& [id, img] : st.images)
        if (img.status == RecordStatus::live && img.signer_id() == entity_id)
            merge(removal_closure(st, id), recipes, images);
    return commit_revocation(writer, finish(st, recipes, std::move(images)), {entity_id}, reason);
}

std::vector<ArchiveSummary> list_archives(const LedgerState& state) {
    std::vector<ArchiveSummary> out;
    for (const auto& ev : state.revocations)
        out.push_back({ev.bundle_id, ev.at, ev.reason, ev.recipes.size(), ev.images.size(), ev.distrusted});
    return out;
}

ArchiveBundle open_archive(const Ledger& ledger, std::string_view bundle_id) {
    const auto& st = ledger.state();
    const RevokeEvent* event = nullptr;
    for (const auto& ev : st.revocations) {
        if (ev.bundle_id.hex().rfind(bundle_id, 0) != 0 || bundle_id.size() < 4) continue;
        if (event) throw Error(ErrorCode::ambiguous, "bundle prefix '" + std::string(bundle_id) + "' is ambiguous");
        event = &ev;
    }
    if (!event) throw Error(ErrorCode::not_found, "unknown bundle '" + std::string(bundle_id) + "'");

    auto dir = ledger.archive_dir() / event->bundle_id.hex();
    json manifest;
    try {
        manifest = json::parse(read_file(dir / "manifest.json"));
    } catch (const json::exception& ex) {
        throw Error(ErrorCode::integrity, std::string("unreadable manifest: ") + ex.what());
    }

    ArchiveBundle bundle{event->bundle_id, event->at, event->reason, event->distrusted, {}, {}, {}, {}};
    try {
        if (manifest.at("bundle_id").get<std::string>() != event->bundle_id.hex())
            throw Error(ErrorCode::integrity, "manifest names a different bundle");
        bundle.created_at = parse_timestamp(manifest.at("created_at").get<std::string>());
        bundle.reason = manifest.at("reason").get<std::string>();
        bundle.distrusted = manifest.at("distrusted").get<std::vector<std::string>>();
        for (const auto& i : manifest.at("items")) {
            ManifestItem item{i.at("type").get<std::string>(), i.at("id").get<std::string>(),
                              Digest::from_hex(i.at("digest").get<std::string>()), i.at("file").get<std::string>()};
            if (item.file.find('/') != std::string::npos || item.file.rfind("..", 0) == 0)
                throw Error(ErrorCode::integrity, "bad item file name " + item.file);
            auto bytes = read_file(dir / item.file);
            if (digest(bytes) != item.digest)
                throw Error(ErrorCode::integrity, "item " + item.file + " does not match its manifest digest");
            if (item.type == "recipe") bundle.removed_recipes.push_back(recipe_from_json(json::parse(bytes)));
            else if (item.type == "image") bundle.removed_images.push_back(image_from_json(json::parse(bytes)));
            else if (item.type == "entity") bundle.signers.push_back(entity_from_json(json::parse(bytes)));
            bundle.items.push_back(std::move(item));
        }
    } catch (const Error& e) {
        if (e.code() == ErrorCode::integrity) throw;
        throw Error(ErrorCode::integrity, std::string("malformed bundle: ") + e.what());
    } catch (const json::exception& ex) {
        throw Error(ErrorCode::integrity, std::string("malformed bundle: ") + ex.what());
    }

    if (digest(bundle_body(bundle).dump()) != bundle.bundle_id)
        throw Error(ErrorCode::integrity, "manifest does not hash to its bundle id");

    std::set<Digest> ev_recipes(event->recipes.begin(), event->recipes.end()), got_recipes;
    std::set<ImageId> ev_images(event->images.begin(), event->images.end()), got_images;
    for (const auto& r : bundle.removed_recipes) got_recipes.insert(r.recipe_hash);
    for (const auto& i : bundle.removed_images) got_images.insert(i.image_id);
    if (ev_recipes != got_recipes || ev_images != got_images)
        throw Error(ErrorCode::integrity, "bundle contents differ from the committed revocation");

    auto key_of = [&](const std::string& signer) -> const PublicKey* {
        for (const auto& e : bundle.signers)
            if (e.entity_id == signer) return &e.public_key;
        return nullptr;
    };
    for (auto& r : bundle.removed_recipes) {
        r.status = RecordStatus::purged;
        const auto* key = key_of(r.signer_id());
        if (!key || digest(r.content) != r.recipe_hash || !verify(r.content, r.signature, *key))
            throw Error(ErrorCode::integrity, "archived recipe " + r.recipe_hash.hex() + " fails verification");
    }
    for (auto& img : bundle.removed_images) {
        img.status = RecordStatus::purged;
        const auto* key = key_of(img.signer_id());
        if (!key || !verify(image_signing_text(img), img.signature, *key))
            throw Error(ErrorCode::integrity, "archived image " + img.image_id.str() + " fails verification");
    }
    for (auto& e : bundle.signers)
        if (std::find(bundle.distrusted.begin(), bundle.distrusted.end(), e.entity_id) != bundle.distrusted.end())
            e.status = EntityStatus::distrusted;
    return bundle;
}

} // namespace spock
