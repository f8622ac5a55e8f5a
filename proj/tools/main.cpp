#include "stoshield/cli.hpp"

#include <iostream>

int main(int argc, char** argv) { return stoshield::run_cli(argc, argv, std::cout, std::cerr); }
