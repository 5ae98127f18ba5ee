#include <iostream>

#include "dho/cli.hpp"

int main(int argc, char** argv) { return dho::run_cli(argc, argv, std::cout, std::cerr); }
