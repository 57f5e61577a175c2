#include <iostream>

#include "lcgibbs/cli.hpp"

int main(int argc, char** argv) { return lcgibbs::run_cli(argc, argv, std::cout, std::cerr); }
