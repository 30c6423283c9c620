#include <iostream>

#include "perflaw/cli.hpp"

int main(int argc, char** argv) {
  return perflaw::cli::run(argc, argv, std::cout, std::cerr);
}
