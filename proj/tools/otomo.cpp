#include <iostream>

#include "otomo/cli.hpp"

int main(int argc, char** argv) { return otomo::app::cli_dispatch(argc, argv, std::cout, std::cerr); }
