#include "hkahler/cli.hpp"

#include <iostream>

int main(int argc, char** argv) {
    std::vector<std::string> args(argv + 1, argv + argc);
    return hkahler::cli::run(args, std::cout, std::cerr);
}
