#include "rubricbn/cli.hpp"

#include <iostream>

int main(int argc, char** argv) { return rubricbn::cli::run(argc, argv, std::cout, std::cerr); }
