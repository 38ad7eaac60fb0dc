#pragma once

#include <spock/config.hpp>

#include <iostream>
#include <string>
#include <vector>

namespace spock {

struct CliIo {
    std::ostream& out = std::cout;
    std::ostream& err = std::cerr;
    std::istream& in = std::cin;
    GetEnv env = process_env();
};

/// Runs one CLI invocation; `args[0]` is the program name. Returns the
/// process exit status:
///   0 ok, 2 usage, 3 not found, 4 integrity/signature, 5 policy denial,
///   10 run denied, 1 other failures (I/O, engine).
int run_cli(const std::vector<std::string>& args, CliIo io = {});

} // namespace spock
