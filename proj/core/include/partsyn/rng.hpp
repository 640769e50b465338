#pragma once

#include <cstdint>
#include <random>

namespace partsyn {

using Rng = std::mt19937_64;

/// Independent random stream for (seed, stream) so that results do not depend
/// on which thread handles which chain or replicate.
Rng make_stream(std::uint64_t seed, std::uint64_t stream);

/// Mixes two words into one with splitmix64 finalisation.
std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream);

}  // namespace partsyn
