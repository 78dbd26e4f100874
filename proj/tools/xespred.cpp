#include <iostream>

#include "xespred/cli.hpp"

int main(int argc, char** argv) { return xespred::run_cli(argc, argv, std::cout, std::cerr); }
