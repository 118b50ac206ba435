#include "rkhs_ode/cli.hpp"

#include <iostream>
#include <string>
#include <vector>

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return rkhs_ode::run_cli(args, std::cout, std::cerr);
}
