#include <iostream>

#include "vth/cli.hpp"

int main(int argc, char** argv) {
  return vth::cli::run(std::vector<std::string>(argv, argv + argc), std::cout, std::cerr);
}
