#include "rotavg/cli.hpp"

#include <iostream>

int main(int argc, char** argv) { return rotavg::cli::run(argc, argv, std::cout, std::cerr); }
