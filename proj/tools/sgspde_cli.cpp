#include <iostream>

#include "sgspde/commands.hpp"

int main(int argc, char** argv) { return sgspde::run_cli(argc, argv, std::cout, std::cerr); }
