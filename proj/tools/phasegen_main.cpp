#include <string>
#include <vector>

#include "phasegen/cli.hpp"

int main(int argc, char** argv) {
  const std::vector<std::string> args(argv + 1, argv + argc);
  return phasegen::cli::run(args);
}
