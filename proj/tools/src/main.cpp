#include <iostream>

#include "cellsim_cli/cli.hpp"

int main(int argc, char** argv) { return cellsim::cli::main(argc, argv, std::cout, std::cerr); }
