#include <iostream>

#include "neuralcanvas/cli.hpp"

int main(int argc, char** argv) {
  return neuralcanvas::run_cli(argc, argv, std::cout, std::cerr);
}
