#include <string>
#include <vector>

#include "xova/cli.hpp"

int main(int argc, char** argv) {
  return xova::cli::run(std::vector<std::string>(argv + 1, argv + argc));
}
