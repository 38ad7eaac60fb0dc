#pragma once

#include <filesystem>
#include <map>
#include <string>

namespace spock {

struct ProcessResult {
    int exit_status = 0;  // 128 + signal number when killed by a signal
    std::string output;   // combined stdout/stderr when captured
};

/// Runs `command` with /bin/sh -c. With `capture`, stdout and stderr are
/// collected; otherwise the child inherits the caller's stdio.
ProcessResult run_shell(const std::string& command, bool capture,
                        const std::filesystem::path& cwd = {});

/// Single-quotes `s` for safe use as one shell word.
std::string shell_quote(const std::string& s);

/// Replaces every "{key}" in `tmpl` with the shell-quoted value.
std::string expand_template(const std::string& tmpl, const std::map<std::string, std::string>& values);

} // namespace spock
