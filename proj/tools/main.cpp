#include <iostream>

#include "hedonic/cli.hpp"

int main(int argc, char** argv) { return hedonic::cli::run(argc, argv, std::cout, std::cerr); }
