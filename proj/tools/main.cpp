#include <iostream>

#include "cad/cli.hpp"

int main(int argc, char** argv) { return cad::run_cli(argc, argv, std::cout, std::cerr); }
