#include <string>
#include <vector>

#include "erckit/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return erc::cli::run_cli(args);
}
