#include <spock/builder.hpp>
#include <spock/cli.hpp>
#include <spock/error.hpp>
#include <spock/provenance.hpp>
#include <spock/recipe.hpp>
#include <spock/revocation.hpp>
#include <spock/rungate.hpp>

#include <CLI11.hpp>
#include <fmt/core.h>

#include <fstream>
#include <sstream>

namespace fs = std::filesystem;
using nlohmann::json;

namespace spock {

namespace {

constexpr const char* env_help = R"(Environment:
  SPOCK_LEDGER         ledger directory
  SPOCK_SIGNER         entity id used to sign recipes and images
  SPOCK_KEY            path of the signer's private key file (never passed on the command line)
  SPOCK_ENGINE         build engine: exec (default) or mock
  SPOCK_SEED           mock engine seed
  SPOCK_BUILD_COMMAND  exec engine template ({recipe} {context} {tag} {parent})
  SPOCK_RUN_COMMAND    run template ({image} {image_id})
  SPOCK_OUTPUT         human or json
  SPOCK_CONFIG         config file (default $XDG_CONFIG_HOME/spock/config.json)
  SPOCK_CLOCK          fixed start time (YYYYMMDDTHHMMSSZ) for reproducible sessions
Precedence: flag > environment > config file > default.)";

struct Options {
    std::string ledger, signer, engine, seed, build_command, run_command, config;
    bool json = false;

    // Per-command arguments.
    std::string file, node, reason, entity, pubkey_file, out_prefix, format = "dot", bundle;
    std::string kind, status, list_signer;
    bool lineage = false;
};

class Session {
public:
    Session(const Options& opts, CliIo& io) : io_(io) {
        ConfigLayer flags;
        if (!opts.ledger.empty()) flags.ledger = opts.ledger;
        if (!opts.signer.empty()) flags.signer = opts.signer;
        if (!opts.engine.empty()) flags.engine = opts.engine;
        if (!opts.seed.empty()) flags.seed = opts.seed;
        if (!opts.build_command.empty()) flags.build_command = opts.build_command;
        if (!opts.run_command.empty()) flags.run_command = opts.run_command;
        if (opts.json) flags.output = OutputMode::json;
        ConfigLayer file;
        if (!opts.config.empty()) file = layer_from_file(opts.config);
        else if (auto p = default_config_path(io.env)) file = layer_from_file(*p);
        config = resolve_config(flags, layer_from_env(io.env), file, defaults(io.env));

        if (auto start = io.env("SPOCK_CLOCK")) clock_ = std::make_shared<SteppingClock>(parse_timestamp(*start));
        else clock_ = system_clock();
    }

    Config config;

    bool as_json() const { return config.output == OutputMode::json; }
    std::ostream& out() { return io_.out; }
    std::istream& in() { return io_.in; }

    LedgerOptions ledger_options() const { return LedgerOptions{clock_, {}}; }
    Ledger open() const { return Ledger::open(config.ledger, ledger_options()); }
    Ledger init() const { return Ledger::init(config.ledger, ledger_options()); }

    std::string signer() const {
        if (!config.signer) throw Error(ErrorCode::usage, "no signer configured (use --signer or SPOCK_SIGNER)");
        return *config.signer;
    }
    PrivateKey key() const {
        if (!config.key_file) throw Error(ErrorCode::usage, "no private key configured (set SPOCK_KEY or 'key' in the config file)");
        return read_private_key_file(*config.key_file);
    }
    std::unique_ptr<BuildEngine> engine() const {
        if (config.engine == "mock") return std::make_unique<MockEngine>(config.seed);
        return std::make_unique<ExecEngine>(config.build_command);
    }

    void emit(const json& j) { io_.out << j.dump(2) << "\n"; }

private:
    CliIo& io_;
    std::shared_ptr<Clock> clock_;
};

std::string read_input(Session& s, const std::string& file) {
    std::ostringstream ss;
    if (file == "-") {
        ss << s.in().rdbuf();
        return ss.str();
    }
    std::ifstream in(file, std::ios::binary);
    if (!in) throw Error(ErrorCode::not_found, "cannot read " + file);
    ss << in.rdbuf();
    return ss.str();
}

json opt_json(const std::optional<ImageId>& id) { return id ? json(id->str()) : json(nullptr); }

json entity_json(const TrustedEntity& e) {
    return {{"entity_id", e.entity_id},
            {"public_key", e.public_key.to_text()},
            {"status", to_string(e.status)},
            {"added_at", format_timestamp(e.added_at)}};
}

json recipe_json(const RecipeRecord& r, bool with_content) {
    json j = {{"recipe_hash", r.recipe_hash.hex()},
              {"kind", to_string(r.kind)},
              {"status", to_string(r.status)},
              {"signer", r.signer_id()},
              {"parent_image_id", opt_json(r.parent_image_id)},
              {"registered_at", format_timestamp(r.registered_at)},
              {"signature", r.signature.to_text()}};
    if (with_content) j["content"] = r.content;
    return j;
}

json image_json(const ImageRecord& i) {
    json steps = json::array();
    for (const auto& d : i.step_digests) steps.push_back(d.hex());
    return {{"image_id", i.image_id.str()},
            {"recipe_hash", i.recipe_hash().hex()},
            {"status", to_string(i.status)},
            {"signer", i.signer_id()},
            {"parent_image_id", opt_json(i.parent_image_id)},
            {"image_digest", i.image_digest.hex()},
            {"step_digests", steps},
            {"signature", i.signature.to_text()}};
}

json bundle_summary_json(const ArchiveBundle& b) {
    json recipes = json::array(), images = json::array();
    for (const auto& r : b.removed_recipes) recipes.push_back(r.recipe_hash.hex());
    for (const auto& i : b.removed_images) images.push_back(i.image_id.str());
    return {{"bundle_id", b.bundle_id.hex()},
            {"created_at", format_timestamp(b.created_at)},
            {"reason", b.reason},
            {"distrusted", b.distrusted},
            {"recipes", recipes},
            {"images", images}};
}

std::string from_of(const RecipeRecord& r) {
    try {
        return parse_recipe(r.content).from_text();
    } catch (const Error&) {
        return "?";
    }
}

void print_bundle(Session& s, const ArchiveBundle& b, std::string_view verb) {
    s.out() << fmt::format("{} {} recipe(s) and {} image(s)\n", verb, b.removed_recipes.size(), b.removed_images.size());
    s.out() << "  bundle: " << b.bundle_id.hex() << "\n";
    for (const auto& d : b.distrusted) s.out() << "  distrusted entity " << d << "\n";
    for (const auto& r : b.removed_recipes) s.out() << "  purged recipe " << r.recipe_hash.hex() << "\n";
    for (const auto& i : b.removed_images) s.out() << "  purged image " << i.image_id.str() << "\n";
}

// ------------------------------------------------------------------ commands

int cmd_init(Session& s) {
    auto ledger = s.init();
    if (s.as_json()) s.emit({{"ledger", s.config.ledger.string()}, {"schema_version", ledger.state().schema_version}});
    else s.out() << "initialized empty ledger at " << s.config.ledger.string() << "\n";
    return 0;
}

int cmd_keygen(Session& s, const Options& o) {
    if (o.out_prefix.empty()) throw Error(ErrorCode::usage, "keygen needs --out <prefix>");
    fs::path priv = o.out_prefix + ".key", pub = o.out_prefix + ".pub";
    if (fs::exists(priv) || fs::exists(pub)) throw Error(ErrorCode::usage, "refusing to overwrite " + priv.string());
    auto kp = keygen();
    write_private_key_file(priv, kp.private_key);
    write_public_key_file(pub, kp.public_key);
    if (s.as_json()) {
        s.emit({{"public_key", kp.public_key.to_text()},
                {"private_key_file", priv.string()},
                {"public_key_file", pub.string()}});
    } else {
        s.out() << "wrote " << priv.string() << " (mode 0600) and " << pub.string() << "\n";
        s.out() << "public key: " << kp.public_key.to_text() << "\n";
    }
    return 0;
}

int cmd_trust_add(Session& s, const Options& o) {
    auto key = read_public_key_file(o.pubkey_file);
    auto ledger = s.open();
    auto writer = ledger.begin_write();
    auto e = writer.put_entity(o.entity, key);
    if (s.as_json()) s.emit({{"entity", entity_json(e)}});
    else s.out() << "trusted " << e.entity_id << " (" << e.public_key.to_text() << ")\n";
    return 0;
}

int cmd_trust_list(Session& s) {
    auto ledger = s.open();
    auto entities = ledger.state().list_entities();
    if (s.as_json()) {
        json arr = json::array();
        for (const auto* e : entities) arr.push_back(entity_json(*e));
        s.emit({{"entities", arr}});
    } else {
        for (const auto* e : entities)
            s.out() << fmt::format("{:<16} {:<10} {}  {}\n", e->entity_id, to_string(e->status),
                                   format_timestamp(e->added_at), e->public_key.to_text());
    }
    return 0;
}

int cmd_trust_distrust(Session& s, const Options& o) {
    auto ledger = s.open();
    auto bundle = distrust(ledger, o.entity, o.reason);
    if (s.as_json()) {
        s.emit({{"entity", entity_json(*ledger.state().find_entity(o.entity))}, {"bundle", bundle_summary_json(bundle)}});
    } else {
        s.out() << "distrusted " << o.entity << "\n";
        print_bundle(s, bundle, "purged");
    }
    return 0;
}

int cmd_register(Session& s, const Options& o, RecipeKind kind) {
    auto text = read_input(s, o.file);
    auto ledger = s.open();
    auto key = s.key();
    auto rec = kind == RecipeKind::root ? register_root(ledger, text, s.signer(), key)
                                        : register_child(ledger, text, s.signer(), key);
    if (s.as_json()) {
        s.emit({{"recipe", recipe_json(rec, false)}});
    } else {
        s.out() << "registered " << to_string(rec.kind) << " recipe " << rec.recipe_hash.hex() << "\n";
        s.out() << "  signer: " << rec.signer_id() << "\n";
        s.out() << "  from: " << from_of(rec) << "\n";
    }
    return 0;
}

int cmd_build(Session& s, const Options& o) {
    auto ledger = s.open();
    auto node = resolve_node(ledger.state(), o.node);
    if (!std::holds_alternative<Digest>(node)) throw Error(ErrorCode::usage, "build takes a recipe hash");
    auto key = s.key();
    auto engine = s.engine();
    auto img = build(ledger, std::get<Digest>(node), *engine, s.signer(), key);
    if (s.as_json()) {
        s.emit({{"image", image_json(img)}});
    } else {
        s.out() << "built image " << img.image_id.str() << "\n";
        s.out() << "  digest: sha256:" << img.image_digest.hex() << "\n";
        s.out() << "  signer: " << img.signer_id() << "\n";
        if (img.parent_image_id) s.out() << "  parent: " << img.parent_image_id->str() << "\n";
    }
    return 0;
}

int cmd_diff_rebuild(Session& s, const Options& o) {
    auto ledger = s.open();
    auto node = resolve_node(ledger.state(), o.node);
    if (!std::holds_alternative<ImageId>(node)) throw Error(ErrorCode::usage, "diff-rebuild takes an image id");
    auto engine = s.engine();
    auto report = diff_rebuild(ledger, std::get<ImageId>(node), *engine);
    if (s.as_json()) {
        s.emit({{"report", to_json(report)}});
    } else {
        s.out() << "verdict: " << to_string(report.verdict) << "\n";
        s.out() << "  quarantine: " << report.quarantine_ref << "\n";
        s.out() << "  trusted digest: " << report.trusted_digest.hex() << "\n";
        s.out() << "  rebuilt digest: " << report.rebuilt_digest.hex() << "\n";
        for (const auto& d : report.step_diffs)
            s.out() << fmt::format("  step {}: {} != {}\n", d.index, d.trusted.prefix(), d.rebuilt.prefix());
    }
    return 0;
}

int cmd_list(Session& s, const Options& o) {
    auto ledger = s.open();
    LedgerState::RecipeFilter f;
    if (!o.kind.empty()) f.kind = recipe_kind_from(o.kind);
    if (!o.status.empty()) f.status = record_status_from(o.status);
    if (!o.list_signer.empty()) f.signer = o.list_signer;
    auto recipes = ledger.state().list_recipes(f);
    if (s.as_json()) {
        json arr = json::array();
        for (const auto* r : recipes) arr.push_back(recipe_json(*r, false));
        s.emit({{"recipes", arr}});
    } else {
        for (const auto* r : recipes)
            s.out() << fmt::format("{}  {:<5}  {:<6}  {:<12}  {}\n", r->recipe_hash.prefix(), to_string(r->kind),
                                   to_string(r->status), r->signer_id(), format_timestamp(r->registered_at));
    }
    return 0;
}

int cmd_validate(Session& s) {
    auto ledger = s.open();
    auto report = validate_all(ledger.state());
    if (s.as_json()) {
        json entries = json::array();
        for (const auto& e : report.entries)
            entries.push_back({{"record_type", e.record_type}, {"id", e.id}, {"ok", e.ok()}, {"problems", e.problems}});
        s.emit({{"ok", report.ok()}, {"entries", entries}});
    } else {
        for (const auto& e : report.entries) {
            s.out() << (e.ok() ? "ok    " : "FAIL  ") << e.record_type << " " << e.id;
            for (std::size_t i = 0; i < e.problems.size(); ++i) s.out() << (i ? ", " : ": ") << e.problems[i];
            s.out() << "\n";
        }
        auto failed = report.failures().size();
        if (failed == 0) s.out() << "validation passed: " << report.entries.size() << " record(s)\n";
        else s.out() << "validation failed: " << failed << " of " << report.entries.size() << " record(s)\n";
    }
    return report.ok() ? 0 : exit_status(ErrorCode::integrity);
}

int cmd_images(Session& s, const Options& o) {
    auto ledger = s.open();
    auto node = resolve_node(ledger.state(), o.node);
    const Digest hash = std::holds_alternative<Digest>(node) ? std::get<Digest>(node) : std::get<ImageId>(node).recipe_hash;
    auto images = ledger.state().images_of(hash);
    if (s.as_json()) {
        json arr = json::array();
        for (const auto* i : images) arr.push_back(image_json(*i));
        s.emit({{"recipe_hash", hash.hex()}, {"images", arr}});
    } else {
        for (const auto* i : images)
            s.out() << fmt::format("{}  {:<6}  {}  {}\n", i->image_id.str(), to_string(i->status), i->image_digest.prefix(),
                                   i->signer_id());
    }
    return 0;
}

int cmd_info(Session& s, const Options& o) {
    auto ledger = s.open();
    const auto& st = ledger.state();
    auto node = resolve_node(st, o.node);
    const Digest hash = std::holds_alternative<Digest>(node) ? std::get<Digest>(node) : std::get<ImageId>(node).recipe_hash;
    const auto& r = *st.find_recipe(hash);
    auto problems = check_recipe(st, r);
    const auto* signer = st.find_entity(r.signer_id());
    bool signed_ok = std::find(problems.begin(), problems.end(), problem::signature_invalid) == problems.end();
    bool trusted = signer && signer->status == EntityStatus::trusted;
    if (s.as_json()) {
        json images = json::array();
        for (const auto* i : st.images_of(hash)) images.push_back(image_json(*i));
        json j = {{"recipe", recipe_json(r, true)},
                  {"signature_valid", signed_ok},
                  {"signer_trusted", trusted},
                  {"problems", problems},
                  {"images", images}};
        if (const auto* id = std::get_if<ImageId>(&node)) j["image"] = image_json(*st.find_image(*id));
        s.emit(j);
        return 0;
    }
    s.out() << "recipe:     " << r.recipe_hash.hex() << "\n";
    s.out() << "kind:       " << to_string(r.kind) << "\n";
    s.out() << "status:     " << to_string(r.status) << "\n";
    s.out() << "from:       " << from_of(r) << "\n";
    s.out() << "signer:     " << r.signer_id() << (trusted ? " (trusted)" : " (NOT trusted)") << "\n";
    s.out() << "signature:  " << (signed_ok ? "valid" : "INVALID") << "\n";
    s.out() << "registered: " << format_timestamp(r.registered_at) << "\n";
    if (r.parent_image_id) s.out() << "parent:     " << r.parent_image_id->str() << "\n";
    for (const auto* i : st.images_of(hash))
        s.out() << "image:      " << i->image_id.str() << " (" << to_string(i->status) << ")\n";
    if (!problems.empty()) {
        s.out() << "problems:  ";
        for (const auto& p : problems) s.out() << " " << p;
        s.out() << "\n";
    }
    return 0;
}

int cmd_content(Session& s, const Options& o) {
    auto ledger = s.open();
    auto text = show_content(ledger.state(), resolve_node(ledger.state(), o.node), o.lineage);
    if (s.as_json()) s.emit({{"content", text}});
    else s.out() << text;
    return 0;
}

int cmd_lineage(Session& s, const Options& o) {
    auto ledger = s.open();
    auto path = lineage(ledger.state(), resolve_node(ledger.state(), o.node));
    if (s.as_json()) {
        json arr = json::array();
        for (const auto& n : path)
            arr.push_back({{"recipe_hash", n.recipe_hash.hex()},
                           {"image_id", opt_json(n.image_id)},
                           {"signer", n.signer_id},
                           {"kind", to_string(n.kind)},
                           {"recipe_status", to_string(n.recipe_status)},
                           {"image_status", n.image_status ? json(to_string(*n.image_status)) : json(nullptr)}});
        s.emit({{"path", arr}});
    } else {
        s.out() << format_lineage(path) << "\n";
    }
    return 0;
}

int cmd_tree(Session& s, const Options& o) {
    auto ledger = s.open();
    if (o.format != "dot" && o.format != "json") throw Error(ErrorCode::usage, "--format must be dot or json");
    auto fmt = s.as_json() || o.format == "json" ? TreeFormat::json : TreeFormat::dot;
    s.out() << export_tree(ledger.state(), fmt);
    return 0;
}

int cmd_remove(Session& s, const Options& o) {
    auto ledger = s.open();
    auto bundle = remove(ledger, resolve_node(ledger.state(), o.node), o.reason);
    if (s.as_json()) s.emit({{"bundle", bundle_summary_json(bundle)}});
    else print_bundle(s, bundle, "removed");
    return 0;
}

int cmd_archives_list(Session& s) {
    auto ledger = s.open();
    auto archives = list_archives(ledger.state());
    if (s.as_json()) {
        json arr = json::array();
        for (const auto& a : archives)
            arr.push_back({{"bundle_id", a.bundle_id.hex()},
                           {"created_at", format_timestamp(a.created_at)},
                           {"reason", a.reason},
                           {"recipes", a.recipes},
                           {"images", a.images},
                           {"distrusted", a.distrusted}});
        s.emit({{"archives", arr}});
    } else {
        for (const auto& a : archives)
            s.out() << fmt::format("{}  {}  recipes={} images={}  {}\n", a.bundle_id.prefix(), format_timestamp(a.created_at),
                                   a.recipes, a.images, a.reason);
    }
    return 0;
}

int cmd_archives_show(Session& s, const Options& o) {
    auto ledger = s.open();
    auto b = open_archive(ledger, o.bundle);
    if (s.as_json()) {
        json recipes = json::array(), images = json::array();
        for (const auto& r : b.removed_recipes) recipes.push_back(recipe_json(r, true));
        for (const auto& i : b.removed_images) images.push_back(image_json(i));
        s.emit({{"manifest", manifest_json(b)}, {"verified", true}, {"recipes", recipes}, {"images", images}});
        return 0;
    }
    s.out() << "bundle:  " << b.bundle_id.hex() << " (verified)\n";
    s.out() << "created: " << format_timestamp(b.created_at) << "\n";
    s.out() << "reason:  " << b.reason << "\n";
    for (const auto& i : b.items) s.out() << fmt::format("  {:<15} {}  {}\n", i.type, i.digest.prefix(), i.file);
    return 0;
}

int cmd_check(Session& s, const Options& o) {
    auto ledger = s.open();
    auto d = check_runnable(ledger, o.node);
    if (s.as_json()) {
        s.emit(to_json(d));
    } else {
        s.out() << to_string(d.verdict) << " " << d.image_id << "\n";
        for (const auto& r : d.reasons) s.out() << "  " << r.str() << "\n";
    }
    return d.allowed() ? 0 : run_denied_status;
}

int cmd_run(Session& s, const Options& o) {
    auto ledger = s.open();
    auto result = run_image(ledger, o.node, s.config.run_command);
    if (!result.spawned) {
        if (s.as_json()) {
            s.emit({{"decision", to_json(result.decision)}, {"spawned", false}, {"exit_status", result.exit_status}});
        } else {
            s.out() << "deny " << result.decision.image_id << "\n";
            for (const auto& r : result.decision.reasons) s.out() << "  " << r.str() << "\n";
        }
    } else if (s.as_json()) {
        s.emit({{"decision", to_json(result.decision)}, {"spawned", true}, {"exit_status", result.exit_status}});
    }
    return result.exit_status;
}

} // namespace

int run_cli(const std::vector<std::string>& args, CliIo io) {
    Options o;
    CLI::App app{"spock: signed-provenance gatekeeper for container image builds", "spock"};
    app.footer(env_help);
    app.require_subcommand(1);
    app.add_option("--ledger", o.ledger, "Ledger directory");
    app.add_option("--signer", o.signer, "Signing entity id");
    app.add_option("--engine", o.engine, "Build engine (exec|mock)");
    app.add_option("--seed", o.seed, "Mock engine seed");
    app.add_option("--build-command", o.build_command, "Exec engine command template");
    app.add_option("--run-command", o.run_command, "Run command template");
    app.add_option("--config", o.config, "Config file");
    app.add_flag("--json", o.json, "Machine-readable JSON output");

    auto* init = app.add_subcommand("init", "Create an empty ledger");
    auto* kg = app.add_subcommand("keygen", "Generate an ed25519 key pair");
    kg->add_option("--out", o.out_prefix, "Output prefix (<prefix>.key, <prefix>.pub)")->required();

    auto* trust = app.add_subcommand("trust", "Manage trusted entities");
    trust->require_subcommand(1);
    auto* trust_add = trust->add_subcommand("add", "Trust an entity's public key");
    trust_add->add_option("entity", o.entity)->required();
    trust_add->add_option("public-key-file", o.pubkey_file)->required();
    auto* trust_list = trust->add_subcommand("list", "List entities");
    auto* trust_distrust = trust->add_subcommand("distrust", "Distrust an entity and purge everything it signed");
    trust_distrust->add_option("entity", o.entity)->required();
    trust_distrust->add_option("--reason", o.reason)->required();

    auto* root = app.add_subcommand("root", "Register a signed root recipe (FROM an external source)");
    root->add_option("file", o.file, "Recipe file, or - for stdin")->required();
    auto* child = app.add_subcommand("child", "Register a signed child recipe (FROM trusted:<image-id>)");
    child->add_option("file", o.file, "Recipe file, or - for stdin")->required();

    auto* buildc = app.add_subcommand("build", "Build a recipe into a signed image");
    buildc->add_option("recipe-hash", o.node)->required();
    auto* diff = app.add_subcommand("diff-rebuild", "Rebuild an image in quarantine and diff it against the trusted one");
    diff->add_option("image-id", o.node)->required();

    auto* list = app.add_subcommand("list", "List recipes");
    list->add_option("--kind", o.kind, "root|child");
    list->add_option("--status", o.status, "live|purged");
    list->add_option("--signer", o.list_signer, "Signer entity id");
    auto* validate = app.add_subcommand("validate", "Verify every record's signature and integrity");
    auto* images = app.add_subcommand("images", "List the images built from a recipe");
    images->add_option("recipe-hash", o.node)->required();
    auto* info = app.add_subcommand("info", "Show a recipe or image");
    info->add_option("node", o.node)->required();
    auto* content = app.add_subcommand("content", "Print recipe content");
    content->add_option("node", o.node)->required();
    content->add_flag("--lineage", o.lineage, "Concatenate every recipe from the root down");
    auto* lin = app.add_subcommand("lineage", "Print the path from the root to a node");
    lin->add_option("node", o.node)->required();
    auto* tree = app.add_subcommand("tree", "Export the provenance forest");
    tree->add_option("--format", o.format, "dot|json");

    auto* rm = app.add_subcommand("remove", "Purge a recipe or image and everything depending on it");
    rm->add_option("node", o.node)->required();
    rm->add_option("--reason", o.reason)->required();
    auto* archives = app.add_subcommand("archives", "Inspect forensic archive bundles");
    archives->require_subcommand(1);
    auto* arch_list = archives->add_subcommand("list", "List bundles");
    auto* arch_show = archives->add_subcommand("show", "Verify and show a bundle");
    arch_show->add_option("bundle-id", o.bundle)->required();

    auto* check = app.add_subcommand("check", "Admission check for running an image");
    check->add_option("image-id", o.node)->required();
    auto* run = app.add_subcommand("run", "Run an image if and only if it is admitted");
    run->add_option("image-id", o.node)->required();

    std::vector<const char*> argv;
    for (const auto& a : args) argv.push_back(a.c_str());
    try {
        app.parse(static_cast<int>(argv.size()), argv.data());
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e, io.out, io.err);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e, io.out, io.err);
    } catch (const CLI::ParseError& e) {
        io.err << "spock: error: " << error_token(ErrorCode::usage) << ": " << e.what() << "\n";
        return exit_status(ErrorCode::usage);
    }

    try {
        Session s(o, io);
        if (*init) return cmd_init(s);
        if (*kg) return cmd_keygen(s, o);
        if (*trust_add) return cmd_trust_add(s, o);
        if (*trust_list) return cmd_trust_list(s);
        if (*trust_distrust) return cmd_trust_distrust(s, o);
        if (*root) return cmd_register(s, o, RecipeKind::root);
        if (*child) return cmd_register(s, o, RecipeKind::child);
        if (*buildc) return cmd_build(s, o);
        if (*diff) return cmd_diff_rebuild(s, o);
        if (*list) return cmd_list(s, o);
        if (*validate) return cmd_validate(s);
        if (*images) return cmd_images(s, o);
        if (*info) return cmd_info(s, o);
        if (*content) return cmd_content(s, o);
        if (*lin) return cmd_lineage(s, o);
        if (*tree) return cmd_tree(s, o);
        if (*rm) return cmd_remove(s, o);
        if (*arch_list) return cmd_archives_list(s);
        if (*arch_show) return cmd_archives_show(s, o);
        if (*check) return cmd_check(s, o);
        if (*run) return cmd_run(s, o);
    } catch (const Error& e) {
        io.err << "spock: error: " << e.token() << ": " << e.what() << "\n";
        return exit_status(e.code());
    } catch (const std::exception& e) {
        io.err << "spock: error: " << error_token(ErrorCode::io) << ": " << e.what() << "\n";
        return 1;
    }
    return exit_status(ErrorCode::usage);
}

} // namespace spock
