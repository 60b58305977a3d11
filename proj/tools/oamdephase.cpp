#include <iostream>
#include <string>
#include <vector>

#include "oamdephase/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv, argv + argc);
  return oamd::cli::run(args, std::cout, std::cerr);
}
