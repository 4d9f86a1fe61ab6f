#include <iostream>

#include "conlab/cli.hpp"

int main(int argc, char** argv) { return conlab::cli::main(argc, argv, std::cout, std::cerr); }
