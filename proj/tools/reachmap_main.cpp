#include <iostream>
#include <string>
#include <vector>

#include "reachmap/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return reachmap::run_cli(args, std::cout, std::cerr);
}
