#include <iostream>

#include "riskmap/cli.hpp"

int main(int argc, char** argv) { return riskmap::run_cli(argc, argv, std::cout, std::cerr); }
