#include <spock/cli.hpp>

int main(int argc, char** argv) {
    return spock::run_cli(std::vector<std::string>(argv, argv + argc));
}
