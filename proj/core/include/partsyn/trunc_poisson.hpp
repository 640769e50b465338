#pragma once

#include "partsyn/rng.hpp"

namespace partsyn::models {

/// Poisson(rate) restricted to {0, ..., upper}.
struct TruncPoissonSpec {
  double rate = 1.0;
  int upper = 365;
};

/// log P(X <= upper) for X ~ Poisson(rate), accurate in both tails.
double log_trunc_poisson_normalizer(double rate, int upper);

/// Throws std::domain_error for k outside {0..upper} or a non-positive rate.
double trunc_poisson_log_pmf(int k, const TruncPoissonSpec& spec);
double trunc_poisson_pmf(int k, const TruncPoissonSpec& spec);

/// Inverse-CDF draw with the cumulative sum accumulated in log space.
int sample_trunc_poisson(const TruncPoissonSpec& spec, Rng& rng);

}  // namespace partsyn::models
