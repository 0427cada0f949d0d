#include <iostream>

#include "cli.hpp"
#include "ocan/platform.hpp"

int main(int argc, char** argv) {
  ocan::tune_allocator();
  return ocan::cli::run(argc, argv, std::cout, std::cerr);
}
