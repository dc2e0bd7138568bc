#include <iostream>

#include "reasongr/cli.hpp"

int main(int argc, char** argv) {
  return reasongr::cli::run(argc, argv, std::cout, std::cerr);
}
