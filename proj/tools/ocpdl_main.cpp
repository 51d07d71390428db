#include "ocpdl/cli.hpp"

int main(int argc, char** argv) {
  return ocpdl::run_cli(std::vector<std::string>(argv + 1, argv + argc));
}
