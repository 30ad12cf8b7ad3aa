#include <iostream>
#include <string>
#include <vector>

#include "svbsc/cli.hpp"

int main(int argc, char** argv) {
    std::vector<std::string> args(argv + 1, argv + argc);
    return svbsc::cli::main_impl(std::move(args), std::cout, std::cerr);
}
