#include <iostream>

#include "pcbound/cli.hpp"

int main(int argc, char** argv) { return pcbound::cli::run(argc, argv, std::cout, std::cerr); }
