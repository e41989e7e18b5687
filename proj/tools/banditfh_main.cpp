#include <iostream>

#include "banditfh/cli.hpp"

int main(int argc, char** argv) {
  return banditfh::run_cli(argc, argv, std::cout, std::cerr);
}
