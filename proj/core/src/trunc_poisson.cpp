#include "partsyn/trunc_poisson.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

#include <boost/math/special_functions/gamma.hpp>

namespace partsyn::models {
namespace {

double log_add(double a, double b) {
  if (a < b) std::swap(a, b);
  if (b == -INFINITY) return a;
  return a + std::log1p(std::exp(b - a));
}

void check_rate(double rate) {
  if (!(rate > 0.0) || !std::isfinite(rate))
    throw std::domain_error("truncated Poisson rate must be positive and finite");
}

}  // namespace

double log_trunc_poisson_normalizer(double rate, int upper) {
  check_rate(rate);
  if (upper < 0) throw std::domain_error("truncation bound must be non-negative");
  const double a = static_cast<double>(upper) + 1.0;
  const double log_rate = std::log(rate);

  if (rate < 0.5 * a) {
    // Upper tail P(X >= upper + 1) by its series; the ratio of successive
    // terms is below 1/2 here.
    const double lead = std::exp(-rate + a * log_rate - std::lgamma(a + 1.0));
    if (lead == 0.0) return 0.0;
    double term = 1.0, sum = 1.0;
    for (double j = 1.0; term > 1e-17 * sum; j += 1.0) {
      term *= rate / (a + j);
      sum += term;
    }
    return std::log1p(-lead * sum);
  }
  if (rate <= 1.5 * a) {
    const double q = boost::math::gamma_q(a, rate);
    if (q > 0.0) return std::log(q);
  }
  // Far right: sum pmf(upper), pmf(upper - 1), ... whose ratios k / rate < 1.
  const double lead = -rate + static_cast<double>(upper) * log_rate - std::lgamma(a);
  double term = 1.0, sum = 1.0;
  for (int k = upper; k >= 1 && term > 1e-17 * sum; --k) {
    term *= static_cast<double>(k) / rate;
    sum += term;
  }
  return lead + std::log(sum);
}

double trunc_poisson_log_pmf(int k, const TruncPoissonSpec& spec) {
  check_rate(spec.rate);
  if (k < 0 || k > spec.upper)
    throw std::domain_error("k = " + std::to_string(k) + " outside truncated Poisson support");
  const double kd = static_cast<double>(k);
  return -spec.rate + kd * std::log(spec.rate) - std::lgamma(kd + 1.0) -
         log_trunc_poisson_normalizer(spec.rate, spec.upper);
}

double trunc_poisson_pmf(int k, const TruncPoissonSpec& spec) { return std::exp(trunc_poisson_log_pmf(k, spec)); }

int sample_trunc_poisson(const TruncPoissonSpec& spec, Rng& rng) {
  check_rate(spec.rate);
  std::uniform_real_distribution<double> uniform(0.0, 1.0);
  const double log_rate = std::log(spec.rate);
  const double target = std::log(uniform(rng)) + log_trunc_poisson_normalizer(spec.rate, spec.upper);
  double log_term = -spec.rate;
  double log_cum = log_term;
  for (int k = 0; k < spec.upper; ++k) {
    if (log_cum >= target) return k;
    log_term += log_rate - std::log(static_cast<double>(k + 1));
    log_cum = log_add(log_cum, log_term);
  }
  return spec.upper;
}

}  // namespace partsyn::models
