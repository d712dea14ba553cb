#include <string>
#include <vector>

#include "unilight/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return unilight::run_cli(args);
}
