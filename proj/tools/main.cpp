#include <iostream>
#include <string>
#include <vector>

#include "sparse_infer/cli.hpp"

int main(int argc, char** argv) {
    const std::vector<std::string> args(argv + 1, argv + argc);
    return sparse_infer::run_cli(args, std::cout, std::cerr);
}
