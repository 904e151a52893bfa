#include "ragforge/cli.hpp"

#include <iostream>

int main(int argc, char** argv) {
    return ragforge::cli::run(argc, argv, {std::cin, std::cout, std::cerr});
}
