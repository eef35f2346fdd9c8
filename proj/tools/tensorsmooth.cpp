#include <iostream>
#include <string>
#include <vector>

#include "tensorsmooth/cli.hpp"

int main(int argc, char** argv) {
    std::vector<std::string> args(argv, argv + argc);
    return tensorsmooth::run_cli(args, std::cout, std::cerr);
}
