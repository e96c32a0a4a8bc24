#include <iostream>

#include "cotforge/cli.hpp"

int main(int argc, char** argv) { return cotforge::cli::dispatch(argc, argv, std::cout, std::cerr); }
