#include <spock/config.hpp>
#include <spock/error.hpp>

#include <nlohmann/json.hpp>

#include <cstdlib>
#include <fstream>

namespace fs = std::filesystem;

namespace spock {

namespace {

OutputMode output_from(const std::string& s) {
    if (s == "human") return OutputMode::human;
    if (s == "json") return OutputMode::json;
    throw Error(ErrorCode::usage, "output mode must be 'human' or 'json', got '" + s + "'");
}

template <class T>
T pick(const std::optional<T>& a, const std::optional<T>& b, const std::optional<T>& c, const std::optional<T>& d,
       T last) {
    if (a) return *a;
    if (b) return *b;
    if (c) return *c;
    if (d) return *d;
    return last;
}

template <class T>
std::optional<T> pick_opt(const std::optional<T>& a, const std::optional<T>& b, const std::optional<T>& c,
                          const std::optional<T>& d) {
    if (a) return a;
    if (b) return b;
    if (c) return c;
    return d;
}

} // namespace

GetEnv process_env() {
    return [](const std::string& name) -> std::optional<std::string> {
        const char* v = std::getenv(name.c_str());
        if (!v || !*v) return std::nullopt;
        return std::string(v);
    };
}

ConfigLayer layer_from_env(const GetEnv& env) {
    ConfigLayer l;
    if (auto v = env("SPOCK_LEDGER")) l.ledger = *v;
    if (auto v = env("SPOCK_KEY")) l.key_file = *v;
    if (auto v = env("SPOCK_SIGNER")) l.signer = *v;
    if (auto v = env("SPOCK_ENGINE")) l.engine = *v;
    if (auto v = env("SPOCK_SEED")) l.seed = *v;
    if (auto v = env("SPOCK_BUILD_COMMAND")) l.build_command = *v;
    if (auto v = env("SPOCK_RUN_COMMAND")) l.run_command = *v;
    if (auto v = env("SPOCK_OUTPUT")) l.output = output_from(*v);
    return l;
}

ConfigLayer layer_from_file(const fs::path& path) {
    ConfigLayer l;
    std::ifstream in(path);
    if (!in) return l;
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& ex) {
        throw Error(ErrorCode::usage, "config file " + path.string() + ": " + ex.what());
    }
    auto str = [&](const char* key) -> std::optional<std::string> {
        if (!j.contains(key)) return std::nullopt;
        if (!j[key].is_string()) throw Error(ErrorCode::usage, std::string("config key '") + key + "' must be a string");
        return j[key].get<std::string>();
    };
    if (auto v = str("ledger")) {
        fs::path p = *v;
        l.ledger = p.is_relative() ? path.parent_path() / p : p;
    }
    if (auto v = str("key")) {
        fs::path p = *v;
        l.key_file = p.is_relative() ? path.parent_path() / p : p;
    }
    l.signer = str("signer");
    l.engine = str("engine");
    l.seed = str("seed");
    l.build_command = str("build_command");
    l.run_command = str("run_command");
    if (auto v = str("output")) l.output = output_from(*v);
    return l;
}

std::optional<fs::path> default_config_path(const GetEnv& env) {
    if (auto v = env("SPOCK_CONFIG")) return fs::path(*v);
    if (auto v = env("XDG_CONFIG_HOME")) return fs::path(*v) / "spock" / "config.json";
    if (auto v = env("HOME")) return fs::path(*v) / ".config" / "spock" / "config.json";
    return std::nullopt;
}

ConfigLayer defaults(const GetEnv& env) {
    ConfigLayer l;
    if (auto v = env("XDG_DATA_HOME")) l.ledger = fs::path(*v) / "spock";
    else if (auto h = env("HOME")) l.ledger = fs::path(*h) / ".local" / "share" / "spock";
    else l.ledger = fs::path(".spock");
    l.engine = "exec";
    l.seed = "spock";
    l.build_command = "docker build --quiet -t {tag} -f {recipe} {context}";
    l.run_command = "docker run --rm {image}";
    l.output = OutputMode::human;
    return l;
}

Config resolve_config(const ConfigLayer& flags, const ConfigLayer& env, const ConfigLayer& file,
                      const ConfigLayer& fallback) {
    Config c;
    c.ledger = pick(flags.ledger, env.ledger, file.ledger, fallback.ledger, fs::path(".spock"));
    c.key_file = pick_opt(flags.key_file, env.key_file, file.key_file, fallback.key_file);
    c.signer = pick_opt(flags.signer, env.signer, file.signer, fallback.signer);
    c.engine = pick(flags.engine, env.engine, file.engine, fallback.engine, std::string("exec"));
    c.seed = pick(flags.seed, env.seed, file.seed, fallback.seed, std::string("spock"));
    c.build_command = pick(flags.build_command, env.build_command, file.build_command, fallback.build_command,
                           std::string());
    c.run_command = pick(flags.run_command, env.run_command, file.run_command, fallback.run_command, std::string());
    c.output = pick(flags.output, env.output, file.output, fallback.output, OutputMode::human);
    if (c.engine != "mock" && c.engine != "exec")
        throw Error(ErrorCode::usage, "engine must be 'mock' or 'exec', got '" + c.engine + "'");
    return c;
}

} // namespace spock
