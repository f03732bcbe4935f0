#include "fmsolve/cli.hpp"

#include <iostream>

int main(int argc, char** argv) {
  return fmsolve::cli::run(argc, argv, std::cout, std::cerr);
}
