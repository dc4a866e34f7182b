#include "lumiparam/cli.hpp"

int main(int argc, char **argv) {
  const std::vector<std::string> args(argv + 1, argv + argc);
  return lumiparam::cli::run(args).exit_code;
}
