#include <iostream>
#include <string>
#include <vector>

#include "spectgnn_cli/commands.hpp"

int main(int argc, char** argv) {
  const std::vector<std::string> args(argv + 1, argv + argc);
  return spectgnn::cli::run(args, std::cerr);
}
