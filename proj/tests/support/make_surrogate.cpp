// Writes a surrogate listings CSV (canonical header) for manual CLI runs.
// usage: make_surrogate <n> <seed> <path>

#include <cstdlib>
#include <iostream>

#include "partsyn/data.hpp"
#include "surrogate.hpp"

int main(int argc, char** argv) {
  if (argc != 4) {
    std::cerr << "usage: make_surrogate <n> <seed> <path>\n";
    return 1;
  }
  const auto n = std::strtoull(argv[1], nullptr, 10);
  const auto seed = std::strtoull(argv[2], nullptr, 10);
  partsyn::data::write_csv(partsyn::testing::surrogate_listings(n, seed), argv[3]);
  return 0;
}
