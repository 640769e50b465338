#include "surrogate.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <random>
#include <string>

#include "partsyn/rng.hpp"

namespace partsyn::testing {
namespace {

struct Level {
  const char* name;
  double share;
  double price_effect;
  double zero_effect;
};

constexpr std::array<Level, 5> kBoroughs = {{{"Manhattan", 0.443, 0.30, 0.0},
                                             {"Brooklyn", 0.411, 0.0, 0.1},
                                             {"Queens", 0.116, -0.15, -0.4},
                                             {"Bronx", 0.022, -0.30, -0.6},
                                             {"Staten Island", 0.008, -0.25, -0.8}}};

constexpr std::array<Level, 3> kRooms = {{{"Entire home/apt", 0.52, 0.0, 0.0},
                                          {"Private room", 0.456, -0.75, -0.2},
                                          {"Shared room", 0.024, -1.10, -0.5}}};

template <std::size_t N>
const Level& pick(const std::array<Level, N>& levels, Rng& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  double x = u(rng);
  for (const auto& l : levels) {
    if (x < l.share) return l;
    x -= l.share;
  }
  return levels.back();
}

}  // namespace

data::Table surrogate_listings(std::size_t n, std::uint64_t seed) {
  Rng rng = make_stream(seed, 0x5a11);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::gamma_distribution<double> review_rate(0.45, 50.0);
  std::gamma_distribution<double> beta_a(0.55, 1.0);
  std::gamma_distribution<double> beta_b(0.45, 1.0);

  data::Table t;
  t.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    const Level& nb = pick(kBoroughs, rng);
    const Level& room = pick(kRooms, rng);

    std::int64_t reviews = 0;
    if (u(rng) > 0.2) {
      std::poisson_distribution<std::int64_t> pois(std::max(review_rate(rng), 1e-3));
      reviews = std::min<std::int64_t>(pois(rng), 629);
    }

    // Listings with no reviews are more often unavailable.
    const double logit_zero = -0.7 + nb.zero_effect + room.zero_effect + (reviews == 0 ? 0.8 : 0.0) -
                              0.15 * std::log1p(static_cast<double>(reviews));
    int days = 0;
    if (u(rng) >= 1.0 / (1.0 + std::exp(-logit_zero))) {
      const double a = beta_a(rng);
      const double b = beta_b(rng);
      days = std::clamp(static_cast<int>(std::ceil(365.0 * a / (a + b))), 1, 365);
    }

    const double log_price = 4.85 + nb.price_effect + room.price_effect + 0.0006 * days -
                             0.03 * std::log1p(static_cast<double>(reviews)) + 0.5 * normal(rng);
    const double price = std::max(10.0, std::round(std::exp(log_price)));
    t.push_back(nb.name, room.name, reviews, days, price);
  }
  return t;
}

}  // namespace partsyn::testing
