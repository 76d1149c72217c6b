#include <iostream>

#include "rkhsmm/cli.hpp"

int main(int argc, char** argv) { return rkhsmm::cli::run(argc, argv, std::cout, std::cerr); }
