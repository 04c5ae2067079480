#include <iostream>
#include <string>
#include <vector>

#include "factsum/cli.hpp"

int main(int argc, char** argv) {
    std::vector<std::string> args(argv + 1, argv + argc);
    return factsum::run_cli(args, std::cout, std::cerr);
}
