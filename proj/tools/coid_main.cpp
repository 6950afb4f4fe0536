#include <iostream>
#include <string>
#include <vector>

#include "coid/cli_commands.hpp"

int main(int argc, char** argv) {
  return coid::run_cli(std::vector<std::string>(argv, argv + argc), std::cout, std::cerr);
}
