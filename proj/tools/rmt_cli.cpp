#include "rmt/cli.hpp"

#include <iostream>

int main(int argc, char** argv) { return rmt::cli::main_entry(argc, argv, std::cout, std::cerr); }
