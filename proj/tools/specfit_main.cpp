#include <iostream>

#include "specfit/cli.hpp"

int main(int argc, char** argv) {
    return specfit::cli::run(argc, argv, std::cout, std::cerr);
}
