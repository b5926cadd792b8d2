#include "hesm/cli.hpp"

#include <iostream>

int main(int argc, char** argv) { return hesm::cli::main(argc, argv, std::cout, std::cerr); }
