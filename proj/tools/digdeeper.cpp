#include "digdeeper/cli.hpp"

#include <iostream>

int main(int argc, char** argv) {
    std::vector<std::string> args(argv + 1, argv + argc);
    return digdeeper::run_cli(args, std::cout, std::cerr);
}
