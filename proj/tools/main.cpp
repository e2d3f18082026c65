#include <string>
#include <vector>

#include "gswan/cli.hpp"

int main(int argc, char** argv) {
    std::vector<std::string> args(argv + 1, argv + argc);
    return gswan::run_cli(args);
}
