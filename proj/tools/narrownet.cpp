#include <iostream>
#include <string>
#include <vector>

#include "narrownet/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return narrownet::run_cli(args, std::cout, std::cerr);
}
