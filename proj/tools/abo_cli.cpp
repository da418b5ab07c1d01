#include <iostream>

#include "abo/cli.hpp"

int main(int argc, char** argv) { return abo::cli::run(argc, argv, std::cout, std::cerr); }
