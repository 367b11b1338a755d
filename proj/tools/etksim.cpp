#include <iostream>

#include "etk/cli.hpp"

int main(int argc, char** argv) { return etk::cli_main(argc, argv, std::cout, std::cerr); }
