#include <iostream>

#include "riskgraph/cli.hpp"

int main(int argc, char** argv) {
  return riskgraph::run_cli(std::vector<std::string>(argv + 1, argv + argc), std::cout, std::cerr);
}
