#include "cli.hpp"

#include <iostream>

int main(int argc, char** argv) { return labkrr::run(argc, argv, std::cout, std::cerr); }
