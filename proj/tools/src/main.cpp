#include <iostream>

#include "airground/cli/commands.hpp"

int main(int argc, char** argv) { return airground::cli::run(argc, argv, std::cout, std::cerr); }
