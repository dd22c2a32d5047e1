#include <iostream>
#include <string>
#include <vector>

#include "lhc/cli.hpp"

int main(int argc, char **argv) {
  return lhc::run_convert(std::vector<std::string>(argv, argv + argc), std::cout, std::cerr);
}
