#include <spock/error.hpp>
#include <spock/ledger.hpp>

#include <fcntl.h>
#include <sys/file.h>
#include <unistd.h>

#include <algorithm>
#include <cerrno>
#include <cstring>
#include <fstream>
#include <sstream>

namespace fs = std::filesystem;
using nlohmann::json;

namespace spock {

namespace {

std::string read_all(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorCode::io, "cannot read " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_all_fd(int fd, std::string_view data, const fs::path& path) {
    while (!data.empty()) {
        ssize_t n = ::write(fd, data.data(), data.size());
        if (n < 0) {
            if (errno == EINTR) continue;
            throw Error(ErrorCode::io, "write failed on " + path.string() + ": " + std::strerror(errno));
        }
        data.remove_prefix(static_cast<std::size_t>(n));
    }
}

void write_file_atomic(const fs::path& path, std::string_view data) {
    auto tmp = path;
    tmp += ".tmp";
    int fd = ::open(tmp.c_str(), O_WRONLY | O_CREAT | O_TRUNC | O_CLOEXEC, 0644);
    if (fd < 0) throw Error(ErrorCode::io, "cannot create " + tmp.string());
    write_all_fd(fd, data, tmp);
    ::fsync(fd);
    ::close(fd);
    fs::rename(tmp, path);
}

class FileLock {
public:
    FileLock(const fs::path& path, int operation) {
        fd_ = ::open(path.c_str(), O_RDWR | O_CREAT | O_CLOEXEC, 0644);
        if (fd_ < 0) throw Error(ErrorCode::io, "cannot open lock file " + path.string());
        while (::flock(fd_, operation) != 0) {
            if (errno != EINTR) {
                ::close(fd_);
                throw Error(ErrorCode::io, "cannot lock " + path.string());
            }
        }
    }
    FileLock(const FileLock&) = delete;
    FileLock& operator=(const FileLock&) = delete;
    ~FileLock() {
        if (fd_ >= 0) ::close(fd_);
    }
    int release() { return std::exchange(fd_, -1); }

private:
    int fd_ = -1;
};

bool valid_entity_id(std::string_view id) {
    if (id.empty() || id.size() > 64) return false;
    return std::all_of(id.begin(), id.end(), [](char c) {
        return std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '_' || c == '.';
    });
}

std::optional<ImageId> optional_image_id(const json& j) {
    if (j.is_null()) return std::nullopt;
    return ImageId::parse(j.get<std::string>());
}

json optional_to_json(const std::optional<ImageId>& id) {
    return id ? json(id->str()) : json(nullptr);
}

// Signatures that cannot be decoded load as empty signatures so that the
// owning record fails verification instead of disappearing from the state.
Signature lenient_signature(const std::string& text, const std::string& signer) {
    try {
        return Signature::from_text(text, signer);
    } catch (const Error&) {
        return Signature{SignatureScheme::ed25519, {}, signer};
    }
}

LogLine parse_log_line(std::string_view raw, std::size_t number) {
    LogLine line;
    line.number = number;
    auto sp1 = raw.find(' ');
    auto sp2 = sp1 == std::string_view::npos ? sp1 : raw.find(' ', sp1 + 1);
    if (sp2 == std::string_view::npos) {
        line.payload = std::string(raw);
        return line;
    }
    line.stated_digest = std::string(raw.substr(0, sp1));
    line.type = std::string(raw.substr(sp1 + 1, sp2 - sp1 - 1));
    line.payload = std::string(raw.substr(sp2 + 1));
    line.digest_ok = digest(line.payload).hex() == line.stated_digest;
    return line;
}

void add_problem(std::vector<std::string>& out, std::string_view p) {
    if (std::find(out.begin(), out.end(), p) == out.end()) out.emplace_back(p);
}

void check_line(const LedgerState& state, const std::string& key, std::vector<std::string>& out) {
    const auto* line = state.line_of(key);
    if (line && !line->digest_ok) add_problem(out, problem::record_digest_mismatch);
}

} // namespace

std::string_view to_string(RecordStatus s) { return s == RecordStatus::live ? "live" : "purged"; }
std::string_view to_string(EntityStatus s) {
    return s == EntityStatus::trusted ? "trusted" : "distrusted";
}
std::string_view to_string(RecipeKind k) { return k == RecipeKind::root ? "root" : "child"; }

RecordStatus record_status_from(std::string_view s) {
    if (s == "live") return RecordStatus::live;
    if (s == "purged") return RecordStatus::purged;
    throw Error(ErrorCode::usage, "unknown status '" + std::string(s) + "'");
}

RecipeKind recipe_kind_from(std::string_view s) {
    if (s == "root") return RecipeKind::root;
    if (s == "child") return RecipeKind::child;
    throw Error(ErrorCode::usage, "unknown kind '" + std::string(s) + "'");
}

std::string ImageId::str() const { return format_timestamp(built_at) + "-" + recipe_hash.hex(); }

std::optional<ImageId> ImageId::try_parse(std::string_view text) {
    if (text.size() != 16 + 1 + 64 || text[16] != '-') return std::nullopt;
    auto ts = try_parse_timestamp(text.substr(0, 16));
    auto hash = Digest::try_from_hex(text.substr(17));
    if (!ts || !hash) return std::nullopt;
    return ImageId{*ts, *hash};
}

ImageId ImageId::parse(std::string_view text) {
    auto id = try_parse(text);
    if (!id) throw Error(ErrorCode::parse, "malformed image id '" + std::string(text) + "'");
    return *id;
}

std::string image_signing_text(const ImageRecord& image) {
    std::string steps;
    for (const auto& d : image.step_digests) {
        if (!steps.empty()) steps += ',';
        steps += d.hex();
    }
    std::string out = "spock-image/1\n";
    out += "image_id " + image.image_id.str() + "\n";
    out += "recipe_hash " + image.recipe_hash().hex() + "\n";
    out += "parent_image_id " + (image.parent_image_id ? image.parent_image_id->str() : "-") + "\n";
    out += "image_digest " + image.image_digest.hex() + "\n";
    out += "step_digests " + (steps.empty() ? "-" : steps) + "\n";
    out += "signer " + image.signer_id() + "\n";
    return out;
}

std::string entity_key(std::string_view id) { return "entity:" + std::string(id); }
std::string recipe_key(const Digest& hash) { return "recipe:" + hash.hex(); }
std::string image_key(const ImageId& id) { return "image:" + id.str(); }

json to_json(const TrustedEntity& e) {
    return {{"entity_id", e.entity_id},
            {"public_key", e.public_key.to_text()},
            {"added_at", format_timestamp(e.added_at)}};
}

json to_json(const RecipeRecord& r) {
    return {{"recipe_hash", r.recipe_hash.hex()},
            {"kind", to_string(r.kind)},
            {"content", r.content},
            {"signature", r.signature.to_text()},
            {"signer", r.signer_id()},
            {"parent_image_id", optional_to_json(r.parent_image_id)},
            {"registered_at", format_timestamp(r.registered_at)}};
}

json to_json(const ImageRecord& i) {
    json steps = json::array();
    for (const auto& d : i.step_digests) steps.push_back(d.hex());
    return {{"image_id", i.image_id.str()},
            {"recipe_hash", i.recipe_hash().hex()},
            {"parent_image_id", optional_to_json(i.parent_image_id)},
            {"image_digest", i.image_digest.hex()},
            {"step_digests", steps},
            {"signature", i.signature.to_text()},
            {"signer", i.signer_id()}};
}

json to_json(const RevokeEvent& ev) {
    json recipes = json::array(), images = json::array();
    for (const auto& r : ev.recipes) recipes.push_back(r.hex());
    for (const auto& i : ev.images) images.push_back(i.str());
    return {{"bundle_id", ev.bundle_id.hex()},
            {"at", format_timestamp(ev.at)},
            {"reason", ev.reason},
            {"distrusted", ev.distrusted},
            {"recipes", recipes},
            {"images", images}};
}

TrustedEntity entity_from_json(const json& j) {
    return TrustedEntity{j.at("entity_id").get<std::string>(),
                         PublicKey::from_text(j.at("public_key").get<std::string>()),
                         EntityStatus::trusted,
                         parse_timestamp(j.at("added_at").get<std::string>())};
}

RecipeRecord recipe_from_json(const json& j) {
    auto signer = j.at("signer").get<std::string>();
    return RecipeRecord{Digest::from_hex(j.at("recipe_hash").get<std::string>()),
                        recipe_kind_from(j.at("kind").get<std::string>()),
                        j.at("content").get<std::string>(),
                        lenient_signature(j.at("signature").get<std::string>(), signer),
                        optional_image_id(j.at("parent_image_id")),
                        RecordStatus::live,
                        parse_timestamp(j.at("registered_at").get<std::string>())};
}

ImageRecord image_from_json(const json& j) {
    auto signer = j.at("signer").get<std::string>();
    auto id = ImageId::parse(j.at("image_id").get<std::string>());
    if (id.recipe_hash.hex() != j.at("recipe_hash").get<std::string>())
        throw Error(ErrorCode::integrity, "image id does not embed its recipe hash");
    std::vector<Digest> steps;
    for (const auto& s : j.at("step_digests")) steps.push_back(Digest::from_hex(s.get<std::string>()));
    return ImageRecord{id,
                       optional_image_id(j.at("parent_image_id")),
                       Digest::from_hex(j.at("image_digest").get<std::string>()),
                       std::move(steps),
                       lenient_signature(j.at("signature").get<std::string>(), signer),
                       RecordStatus::live};
}

RevokeEvent revoke_from_json(const json& j) {
    RevokeEvent ev{Digest::from_hex(j.at("bundle_id").get<std::string>()),
                   parse_timestamp(j.at("at").get<std::string>()),
                   j.at("reason").get<std::string>(),
                   j.at("distrusted").get<std::vector<std::string>>(),
                   {},
                   {}};
    for (const auto& r : j.at("recipes")) ev.recipes.push_back(Digest::from_hex(r.get<std::string>()));
    for (const auto& i : j.at("images")) ev.images.push_back(ImageId::parse(i.get<std::string>()));
    return ev;
}

std::string format_log_line(std::string_view type, const json& body) {
    auto payload = body.dump();
    return digest(payload).hex() + " " + std::string(type) + " " + payload + "\n";
}

// ---------------------------------------------------------------- LedgerState

const TrustedEntity* LedgerState::find_entity(std::string_view id) const {
    auto it = entities.find(std::string(id));
    return it == entities.end() ? nullptr : &it->second;
}

const RecipeRecord* LedgerState::find_recipe(const Digest& hash) const {
    auto it = recipes.find(hash);
    return it == recipes.end() ? nullptr : &it->second;
}

const ImageRecord* LedgerState::find_image(const ImageId& id) const {
    auto it = images.find(id);
    return it == images.end() ? nullptr : &it->second;
}

const ImageRecord* LedgerState::live_image_for(const Digest& recipe_hash) const {
    for (const auto* img : images_of(recipe_hash))
        if (img->status == RecordStatus::live) return img;
    return nullptr;
}

std::vector<const ImageRecord*> LedgerState::images_of(const Digest& recipe_hash) const {
    std::vector<const ImageRecord*> out;
    for (const auto& [id, img] : images)
        if (id.recipe_hash == recipe_hash) out.push_back(&img);
    return out;
}

const LogLine* LedgerState::line_of(const std::string& record_key) const {
    auto it = origin.find(record_key);
    return it == origin.end() ? nullptr : &lines[it->second];
}

bool LedgerState::is_trusted(std::string_view entity_id) const {
    const auto* e = find_entity(entity_id);
    return e && e->status == EntityStatus::trusted;
}

Digest LedgerState::state_digest() const {
    std::string all;
    for (const auto& l : lines) {
        all += l.stated_digest;
        all += ' ';
        all += l.type;
        all += ' ';
        all += l.payload;
        all += '\n';
    }
    return digest(all);
}

std::vector<const TrustedEntity*> LedgerState::list_entities() const {
    std::vector<const TrustedEntity*> out;
    for (const auto& [id, e] : entities) out.push_back(&e);
    return out;
}

std::vector<const RecipeRecord*> LedgerState::list_recipes(const RecipeFilter& filter) const {
    std::vector<const RecipeRecord*> out;
    for (const auto& [hash, r] : recipes) {
        if (filter.kind && r.kind != *filter.kind) continue;
        if (filter.status && r.status != *filter.status) continue;
        if (filter.signer && r.signer_id() != *filter.signer) continue;
        out.push_back(&r);
    }
    std::sort(out.begin(), out.end(), [](const RecipeRecord* a, const RecipeRecord* b) {
        return std::tie(a->registered_at, a->recipe_hash) < std::tie(b->registered_at, b->recipe_hash);
    });
    return out;
}

std::vector<const ImageRecord*> LedgerState::list_images(std::optional<RecordStatus> status) const {
    std::vector<const ImageRecord*> out;
    for (const auto& [id, img] : images)
        if (!status || img.status == *status) out.push_back(&img);
    return out;
}

void LedgerState::apply(LogLine line) {
    std::size_t index = lines.size();
    std::size_t number = line.number;
    lines.push_back(std::move(line));
    const LogLine& l = lines.back();
    auto issue = [&](std::string what) { issues.push_back({number, std::move(what)}); };

    if (l.type.empty()) {
        issue("malformed line");
        return;
    }
    try {
        auto body = json::parse(l.payload);
        if (l.type == "schema") {
            if (index != 0) issue("schema record after first line");
            schema_version = body.at("version").get<int>();
        } else if (l.type == "entity") {
            auto e = entity_from_json(body);
            auto key = entity_key(e.entity_id);
            if (entities.count(e.entity_id)) return issue("duplicate entity " + e.entity_id);
            origin[key] = index;
            entities.emplace(e.entity_id, std::move(e));
        } else if (l.type == "recipe") {
            auto r = recipe_from_json(body);
            auto key = recipe_key(r.recipe_hash);
            if (recipes.count(r.recipe_hash)) return issue("duplicate recipe " + r.recipe_hash.hex());
            origin[key] = index;
            recipes.emplace(r.recipe_hash, std::move(r));
        } else if (l.type == "image") {
            auto i = image_from_json(body);
            auto key = image_key(i.image_id);
            if (images.count(i.image_id)) return issue("duplicate image " + i.image_id.str());
            origin[key] = index;
            images.emplace(i.image_id, std::move(i));
        } else if (l.type == "revoke") {
            auto ev = revoke_from_json(body);
            for (const auto& id : ev.distrusted) {
                auto it = entities.find(id);
                if (it == entities.end()) issue("revoke names unknown entity " + id);
                else it->second.status = EntityStatus::distrusted;
            }
            for (const auto& h : ev.recipes) {
                auto it = recipes.find(h);
                if (it == recipes.end()) issue("revoke names unknown recipe " + h.hex());
                else it->second.status = RecordStatus::purged;
            }
            for (const auto& i : ev.images) {
                auto it = images.find(i);
                if (it == images.end()) issue("revoke names unknown image " + i.str());
                else it->second.status = RecordStatus::purged;
            }
            revocations.push_back(std::move(ev));
        } else if (l.type == "diff" || l.type == "admission") {
            audit.push_back({l.type, std::move(body)});
        } else {
            issue("unknown record type '" + l.type + "'");
        }
    } catch (const std::exception& ex) {
        issue(std::string("unreadable record: ") + ex.what());
    }
}

// ---------------------------------------------------------------- Ledger

Ledger::Ledger(fs::path dir, LedgerOptions options)
    : dir_(std::move(dir)), options_(std::move(options)), state_(std::make_unique<LedgerState>()) {
    if (!options_.clock) options_.clock = system_clock();
}

Ledger::Ledger(Ledger&&) noexcept = default;
Ledger& Ledger::operator=(Ledger&&) noexcept = default;
Ledger::~Ledger() = default;

Ledger Ledger::init(const fs::path& dir, LedgerOptions options) {
    std::error_code ec;
    if (fs::exists(dir, ec)) {
        if (!fs::is_directory(dir) || !fs::is_empty(dir))
            throw Error(ErrorCode::ledger_exists, "path exists and is not empty: " + dir.string());
    }
    fs::create_directories(dir);
    for (const char* sub : {"keys", "archive", "index"}) fs::create_directories(dir / sub);
    {
        std::ofstream lock(dir / "ledger.lock");
    }
    json schema = {{"schema", "spock-ledger"}, {"version", ledger_schema_version}};
    write_file_atomic(dir / "ledger.log", format_log_line("schema", schema));
    return open(dir, std::move(options));
}

Ledger Ledger::open(const fs::path& dir, LedgerOptions options) {
    if (!fs::exists(dir / "ledger.log"))
        throw Error(ErrorCode::not_found, "no ledger at " + dir.string());
    Ledger ledger(dir, std::move(options));
    ledger.refresh();
    if (ledger.state().schema_version != ledger_schema_version)
        throw Error(ErrorCode::integrity, "unsupported or missing ledger schema version in " + dir.string());
    return ledger;
}

void Ledger::refresh() {
    FileLock lock(dir_ / "ledger.lock", LOCK_SH);
    load();
}

void Ledger::load() {
    auto text = read_all(log_path());
    auto fresh = std::make_unique<LedgerState>();
    std::size_t pos = 0, number = 0;
    while (pos < text.size()) {
        auto nl = text.find('\n', pos);
        if (nl == std::string::npos) break;  // torn tail from an interrupted append
        fresh->apply(parse_log_line(std::string_view(text).substr(pos, nl - pos), ++number));
        pos = nl + 1;
    }
    state_ = std::move(fresh);
}

void Ledger::recover() {
    recovery_log_.clear();
    auto text = read_all(log_path());
    if (!text.empty() && text.back() != '\n') {
        auto keep = text.rfind('\n');
        keep = keep == std::string::npos ? 0 : keep + 1;
        fs::resize_file(log_path(), keep);
        recovery_log_.push_back("truncated torn log tail (" + std::to_string(text.size() - keep) + " bytes)");
    }
    load();

    auto archive = archive_dir();
    if (!fs::exists(archive)) return;
    std::vector<fs::path> entries;
    for (const auto& e : fs::directory_iterator(archive)) entries.push_back(e.path());
    std::sort(entries.begin(), entries.end());
    for (const auto& p : entries) {
        auto name = p.filename().string();
        if (name.rfind(".tmp-", 0) == 0) {
            fs::remove_all(p);
            recovery_log_.push_back("removed incomplete bundle " + name);
            continue;
        }
        auto id = Digest::try_from_hex(name);
        if (!id) continue;
        bool committed = std::any_of(state_->revocations.begin(), state_->revocations.end(),
                                     [&](const RevokeEvent& ev) { return ev.bundle_id == *id; });
        if (!committed) {
            auto dest = archive / ".orphaned" / name;
            fs::create_directories(dest.parent_path());
            if (fs::exists(dest)) fs::remove_all(dest);
            fs::rename(p, dest);
            recovery_log_.push_back("moved uncommitted bundle " + name + " to archive/.orphaned");
        }
    }
}

void Ledger::fault_point(std::string_view name) const {
    if (options_.fault_hook) options_.fault_hook(name);
}

void Ledger::write_index() const {
    json live_recipes = json::array(), live_images = json::array();
    for (const auto* r : state_->list_recipes({std::nullopt, RecordStatus::live, std::nullopt}))
        live_recipes.push_back(r->recipe_hash.hex());
    for (const auto* i : state_->list_images(RecordStatus::live)) live_images.push_back(i->image_id.str());
    json index = {{"log_lines", state_->lines.size()},
                  {"state_digest", state_->state_digest().hex()},
                  {"live_recipes", live_recipes},
                  {"live_images", live_images}};
    fs::create_directories(index_dir());
    write_file_atomic(index_dir() / "summary.json", index.dump(2) + "\n");
}

Ledger::Writer Ledger::begin_write() { return Writer(*this); }

Ledger::Writer::Writer(Ledger& ledger) : ledger_(&ledger) {
    FileLock lock(ledger.dir_ / "ledger.lock", LOCK_EX);
    ledger.recover();
    lock_fd_ = lock.release();
}

Ledger::Writer::Writer(Writer&& other) noexcept
    : ledger_(other.ledger_), lock_fd_(std::exchange(other.lock_fd_, -1)) {}

Ledger::Writer::~Writer() {
    if (lock_fd_ >= 0) ::close(lock_fd_);
}

void Ledger::Writer::append(std::string_view type, const json& body) {
    auto line = format_log_line(type, body);
    auto path = ledger_->log_path();
    ledger_->fault_point("append:before-write");
    int fd = ::open(path.c_str(), O_WRONLY | O_APPEND | O_CLOEXEC);
    if (fd < 0) throw Error(ErrorCode::io, "cannot open " + path.string());
    try {
        write_all_fd(fd, line, path);
    } catch (...) {
        ::close(fd);
        throw;
    }
    ::fsync(fd);
    ::close(fd);
    line.pop_back();
    ledger_->state_->apply(parse_log_line(line, ledger_->state_->lines.size() + 1));
    ledger_->write_index();
}

const TrustedEntity& Ledger::Writer::put_entity(const std::string& entity_id, const PublicKey& key) {
    if (!valid_entity_id(entity_id))
        throw Error(ErrorCode::usage, "invalid entity id '" + entity_id + "' (use [A-Za-z0-9._-], max 64)");
    if (state().find_entity(entity_id))
        throw Error(ErrorCode::duplicate_entity, "entity '" + entity_id + "' already exists");
    if (key.bytes.size() != 32) throw Error(ErrorCode::crypto, "malformed public key");
    TrustedEntity e{entity_id, key, EntityStatus::trusted, ledger_->clock().now()};
    append("entity", to_json(e));
    fs::create_directories(ledger_->keys_dir());
    write_public_key_file(ledger_->keys_dir() / (entity_id + ".pub"), key);
    return *state().find_entity(entity_id);
}

const RecipeRecord& Ledger::Writer::put_recipe(const RecipeRecord& r) {
    const auto& st = state();
    if (const auto* existing = st.find_recipe(r.recipe_hash)) {
        if (existing->status == RecordStatus::purged)
            throw Error(ErrorCode::purged, "recipe " + r.recipe_hash.hex() + " was purged and may never return");
        throw Error(ErrorCode::already_registered, "recipe " + r.recipe_hash.hex() + " is already registered");
    }
    if (digest(r.content) != r.recipe_hash)
        throw Error(ErrorCode::integrity, "recipe hash does not match its content");
    const auto* signer = st.find_entity(r.signer_id());
    if (!signer) throw Error(ErrorCode::integrity, "unknown signer '" + r.signer_id() + "'");
    if ((r.kind == RecipeKind::child) != r.parent_image_id.has_value())
        throw Error(ErrorCode::integrity, "child recipes need a parent image and roots must not have one");
    if (r.parent_image_id) {
        const auto* parent = st.find_image(*r.parent_image_id);
        if (!parent) throw Error(ErrorCode::integrity, "unknown parent image " + r.parent_image_id->str());
        if (parent->status != RecordStatus::live)
            throw Error(ErrorCode::integrity, "parent image " + r.parent_image_id->str() + " is purged");
    }
    if (!verify(r.content, r.signature, signer->public_key))
        throw Error(ErrorCode::signature_invalid, "recipe signature does not verify under '" + r.signer_id() + "'");
    append("recipe", to_json(r));
    return *state().find_recipe(r.recipe_hash);
}

const ImageRecord& Ledger::Writer::put_image(const ImageRecord& img) {
    const auto& st = state();
    if (st.find_image(img.image_id))
        throw Error(ErrorCode::integrity, "duplicate image id " + img.image_id.str());
    const auto* recipe = st.find_recipe(img.recipe_hash());
    if (!recipe) throw Error(ErrorCode::integrity, "unknown recipe " + img.recipe_hash().hex());
    if (recipe->status != RecordStatus::live)
        throw Error(ErrorCode::purged, "recipe " + img.recipe_hash().hex() + " is purged");
    if (const auto* live = st.live_image_for(img.recipe_hash()))
        throw Error(ErrorCode::rebuild_denied,
                    "recipe " + img.recipe_hash().hex() + " already has live image " + live->image_id.str());
    if (img.parent_image_id != recipe->parent_image_id)
        throw Error(ErrorCode::integrity, "image parent does not match its recipe's parent");
    if (img.parent_image_id) {
        const auto* parent = st.find_image(*img.parent_image_id);
        if (!parent || parent->status != RecordStatus::live)
            throw Error(ErrorCode::integrity, "parent image " + img.parent_image_id->str() + " is not live");
        if (img.built_at() <= parent->built_at())
            throw Error(ErrorCode::integrity, "child image must be built strictly after its parent");
    }
    const auto* signer = st.find_entity(img.signer_id());
    if (!signer) throw Error(ErrorCode::integrity, "unknown signer '" + img.signer_id() + "'");
    if (!verify(image_signing_text(img), img.signature, signer->public_key))
        throw Error(ErrorCode::signature_invalid, "image signature does not verify under '" + img.signer_id() + "'");
    append("image", to_json(img));
    return *state().find_image(img.image_id);
}

void Ledger::Writer::put_revoke(const RevokeEvent& ev) {
    const auto& st = state();
    for (const auto& id : ev.distrusted)
        if (!st.is_trusted(id)) throw Error(ErrorCode::integrity, "cannot distrust '" + id + "'");
    for (const auto& h : ev.recipes) {
        const auto* r = st.find_recipe(h);
        if (!r || r->status != RecordStatus::live)
            throw Error(ErrorCode::integrity, "cannot purge recipe " + h.hex());
    }
    for (const auto& i : ev.images) {
        const auto* img = st.find_image(i);
        if (!img || img->status != RecordStatus::live)
            throw Error(ErrorCode::integrity, "cannot purge image " + i.str());
    }
    append("revoke", to_json(ev));
}

void Ledger::Writer::put_audit(const AuditEvent& ev) {
    if (ev.type != "diff" && ev.type != "admission")
        throw Error(ErrorCode::usage, "unknown audit event type " + ev.type);
    append(ev.type, ev.body);
}

TrustedEntity add_entity(Ledger& ledger, const std::string& entity_id, const PublicKey& key) {
    auto writer = ledger.begin_write();
    return writer.put_entity(entity_id, key);
}

// ---------------------------------------------------------------- validation

std::vector<std::string> check_entity(const LedgerState& state, const TrustedEntity& entity) {
    std::vector<std::string> out;
    check_line(state, entity_key(entity.entity_id), out);
    if (entity.public_key.bytes.size() != 32) add_problem(out, problem::signature_invalid);
    return out;
}

std::vector<std::string> check_recipe(const LedgerState& state, const RecipeRecord& r) {
    std::vector<std::string> out;
    check_line(state, recipe_key(r.recipe_hash), out);
    if (digest(r.content) != r.recipe_hash) add_problem(out, problem::content_hash_mismatch);
    const auto* signer = state.find_entity(r.signer_id());
    if (!signer) {
        add_problem(out, problem::unknown_signer);
    } else {
        if (!verify(r.content, r.signature, signer->public_key)) add_problem(out, problem::signature_invalid);
        if (r.status == RecordStatus::live && signer->status == EntityStatus::distrusted)
            add_problem(out, problem::signer_distrusted);
    }
    if ((r.kind == RecipeKind::child) != r.parent_image_id.has_value()) add_problem(out, problem::kind_mismatch);
    if (r.parent_image_id) {
        const auto* parent = state.find_image(*r.parent_image_id);
        if (!parent) add_problem(out, problem::unknown_parent);
        else if (r.status == RecordStatus::live && parent->status != RecordStatus::live)
            add_problem(out, problem::dangling_reference);
    }
    return out;
}

std::vector<std::string> check_image(const LedgerState& state, const ImageRecord& img) {
    std::vector<std::string> out;
    check_line(state, image_key(img.image_id), out);
    const auto* signer = state.find_entity(img.signer_id());
    if (!signer) {
        add_problem(out, problem::unknown_signer);
    } else {
        if (!verify(image_signing_text(img), img.signature, signer->public_key))
            add_problem(out, problem::signature_invalid);
        if (img.status == RecordStatus::live && signer->status == EntityStatus::distrusted)
            add_problem(out, problem::signer_distrusted);
    }
    const auto* recipe = state.find_recipe(img.recipe_hash());
    if (!recipe) {
        add_problem(out, problem::unknown_recipe);
    } else {
        if (recipe->parent_image_id != img.parent_image_id) add_problem(out, problem::parent_mismatch);
        if (img.status == RecordStatus::live && recipe->status != RecordStatus::live)
            add_problem(out, problem::dangling_reference);
    }
    if (img.parent_image_id) {
        const auto* parent = state.find_image(*img.parent_image_id);
        if (!parent) add_problem(out, problem::unknown_parent);
        else if (img.status == RecordStatus::live && parent->status != RecordStatus::live)
            add_problem(out, problem::dangling_reference);
    }
    return out;
}

bool ValidationReport::ok() const {
    return std::all_of(entries.begin(), entries.end(), [](const auto& e) { return e.ok(); });
}

std::vector<const ValidationEntry*> ValidationReport::failures() const {
    std::vector<const ValidationEntry*> out;
    for (const auto& e : entries)
        if (!e.ok()) out.push_back(&e);
    return out;
}

ValidationReport validate_all(const LedgerState& state) {
    ValidationReport report;
    for (const auto& [id, e] : state.entities) report.entries.push_back({"entity", id, check_entity(state, e)});
    for (const auto* r : state.list_recipes())
        report.entries.push_back({"recipe", r->recipe_hash.hex(), check_recipe(state, *r)});
    for (const auto& [id, img] : state.images)
        report.entries.push_back({"image", id.str(), check_image(state, img)});
    // Event lines carry no signature, so their log digest is the only integrity check.
    for (const auto& line : state.lines)
        if (line.type == "schema" || line.type == "revoke" || line.type == "diff" || line.type == "admission")
            report.entries.push_back({line.type, "line " + std::to_string(line.number),
                                      line.digest_ok ? std::vector<std::string>{}
                                                     : std::vector<std::string>{std::string(problem::record_digest_mismatch)}});
    for (const auto& issue : state.issues)
        report.entries.push_back({"line", std::to_string(issue.line), {std::string(problem::unreadable) + ": " + issue.what}});
    return report;
}

} // namespace spock
