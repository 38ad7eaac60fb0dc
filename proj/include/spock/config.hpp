#pragma once

#include <filesystem>
#include <functional>
#include <optional>
#include <string>

namespace spock {

enum class OutputMode { human, json };

/// Settings a single source can provide; unset fields fall through to the
/// next source.
struct ConfigLayer {
    std::optional<std::filesystem::path> ledger;
    std::optional<std::filesystem::path> key_file;
    std::optional<std::string> signer;
    std::optional<std::string> engine;  // "mock" | "exec"
    std::optional<std::string> seed;
    std::optional<std::string> build_command;
    std::optional<std::string> run_command;
    std::optional<OutputMode> output;
};

struct Config {
    std::filesystem::path ledger;
    std::optional<std::filesystem::path> key_file;
    std::optional<std::string> signer;
    std::string engine;
    std::string seed;
    std::string build_command;
    std::string run_command;
    OutputMode output = OutputMode::human;
};

using GetEnv = std::function<std::optional<std::string>(const std::string&)>;

/// Reads the process environment.
GetEnv process_env();

/// SPOCK_LEDGER, SPOCK_SIGNER, SPOCK_KEY, SPOCK_ENGINE, SPOCK_SEED,
/// SPOCK_BUILD_COMMAND, SPOCK_RUN_COMMAND, SPOCK_OUTPUT.
ConfigLayer layer_from_env(const GetEnv& env);

/// JSON object with keys ledger, key, signer, engine, seed, build_command,
/// run_command, output. A missing file yields an empty layer.
ConfigLayer layer_from_file(const std::filesystem::path& path);

/// $SPOCK_CONFIG, else $XDG_CONFIG_HOME/spock/config.json, else
/// $HOME/.config/spock/config.json.
std::optional<std::filesystem::path> default_config_path(const GetEnv& env);

ConfigLayer defaults(const GetEnv& env);

/// Precedence: flags > environment > config file > defaults.
Config resolve_config(const ConfigLayer& flags, const ConfigLayer& env, const ConfigLayer& file,
                      const ConfigLayer& fallback);

} // namespace spock
