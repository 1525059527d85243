#include <iostream>

#include "dosefind/app/cli.hpp"

int main(int argc, char** argv) { return dosefind::app::run_cli(argc, argv, std::cout, std::cerr); }
