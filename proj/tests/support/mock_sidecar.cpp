// Stdio encoder sidecar for protocol tests.
//   mock_sidecar [--dim D] [--violate dim|offsets|json|error|nan] [--die-after N]

#include <cstdlib>
#include <iostream>
#include <string>

#include "mock_protocol.hpp"

int main(int argc, char** argv) {
  xlsim::testing::MockOptions opt;
  long die_after = -1;
  for (int i = 1; i + 1 < argc; i += 2) {
    const std::string flag = argv[i];
    if (flag == "--dim") opt.dim = std::stoul(argv[i + 1]);
    if (flag == "--violate") opt.violate = argv[i + 1];
    if (flag == "--die-after") die_after = std::stol(argv[i + 1]);
  }
  std::string line;
  long served = 0;
  while (std::getline(std::cin, line)) {
    if (die_after >= 0 && served++ >= die_after) return 1;
    std::cout << xlsim::testing::mock_reply(line, opt) << '\n' << std::flush;
  }
  return 0;
}
