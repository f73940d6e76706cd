#include <iostream>

#include "nfsum/cli.hpp"

int main(int argc, char** argv) { return nfsum::cli::run(argc, argv, std::cout, std::cerr); }
