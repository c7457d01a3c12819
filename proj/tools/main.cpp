#include <iostream>

#include "streamcrf_cli/cli.hpp"

int main(int argc, char** argv) { return streamcrf::cli::run(argc, argv, std::cout, std::cerr); }
