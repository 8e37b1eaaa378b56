#include <cstdlib>
#include <iostream>
#include <string>
#include <vector>

#include "sgdnoise/acceptance.hpp"

// Usage: sgdnoise_acceptance [--threads N] [criterion ...]
int main(int argc, char** argv) {
  sgdnoise::AcceptanceOptions opts;
  std::vector<int> ids;
  for (int i = 1; i < argc; ++i) {
    const std::string arg = argv[i];
    if (arg == "--threads" && i + 1 < argc) {
      opts.threads = std::size_t(std::stoul(argv[++i]));
    } else {
      ids.push_back(std::stoi(arg));
    }
  }
  return sgdnoise::run_acceptance(std::cout, ids, opts) ? EXIT_SUCCESS : EXIT_FAILURE;
}
