#include <iostream>

#include "mcdag/cli.hpp"

int main(int argc, char** argv) { return mcdag::run_cli(argc, argv, std::cout, std::cerr); }
