#include <iostream>
#include <string>
#include <vector>

#include "fusad/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv, argv + argc);
  return fusad::run_cli(args, std::cout, std::cerr);
}
