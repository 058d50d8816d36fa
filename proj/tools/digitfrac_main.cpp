#include "digitfrac/cli.hpp"

#include <iostream>

int main(int argc, char** argv) {
  return digitfrac::cli::run(argc, argv, std::cout, std::cerr);
}
