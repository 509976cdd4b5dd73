#include <iostream>

#include "gshare/cli.hpp"

int main(int argc, char** argv) { return gshare::run_cli(argc, argv, std::cout, std::cerr); }
