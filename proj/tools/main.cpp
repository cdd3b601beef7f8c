#include <iostream>
#include <string>
#include <vector>

#include "panellp/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return panellp::run_cli(args, std::cout, std::cerr);
}
