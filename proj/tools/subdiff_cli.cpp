#include <string>
#include <vector>

#include "subdiff/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return subdiff::run_cli(std::move(args));
}
