#include <iostream>

#include "rivalhmm/cli.hpp"

int main(int argc, char** argv) { return rivalhmm::run_cli(argc, argv, std::cout, std::cerr); }
