#pragma once

#include <cstddef>
#include <cstdint>

#include "partsyn/data.hpp"

namespace partsyn::testing {

/// Listings table shaped like the public NYC file: five boroughs, three room
/// types, heavy-tailed review counts, zero-inflated availability and
/// log-normal integer prices that depend on the other four columns.
/// Stands in for the real file when it is not available.
data::Table surrogate_listings(std::size_t n, std::uint64_t seed);

}  // namespace partsyn::testing
