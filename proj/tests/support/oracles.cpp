#include "oracles.hpp"

#include <algorithm>
#include <cmath>

namespace partsyn::oracle {

namespace {

bool same_keys(const data::Table& a, std::size_t i, const data::Table& b, std::size_t j, std::int64_t reviews_i) {
  return a.room_type[i] == b.room_type[j] && a.neighborhood[i] == b.neighborhood[j] && b.reviews[j] == reviews_i;
}

}  // namespace

double attribute_risk(const data::Table& conf, const data::Table& syn, double r_avail, double r_price) {
  double total = 0.0;
  for (std::size_t i = 0; i < conf.size(); ++i) {
    int matched = 0;
    int similar = 0;
    for (std::size_t j = 0; j < syn.size(); ++j) {
      if (!same_keys(conf, i, syn, j, conf.reviews[i])) continue;
      ++matched;
      const bool days_close = std::abs(syn.days[j] - conf.days[i]) <= r_avail;
      const bool price_close = std::abs(syn.price[j] - conf.price[i]) / conf.price[i] <= r_price;
      if (days_close && price_close) ++similar;
    }
    if (matched > 0) total += static_cast<double>(similar) / matched;
  }
  return total;
}

Identification identification_risk(const data::Table& conf, const data::Table& comparison, double r_avail,
                                   double r_price, bool log_price, std::span<const std::int64_t> known) {
  Identification out;
  out.true_match.assign(conf.size(), 0);
  std::size_t true_unique = 0;
  std::size_t false_unique = 0;
  for (std::size_t i = 0; i < conf.size(); ++i) {
    const std::int64_t rc = known.empty() ? conf.reviews[i] : known[i];
    int c = 0;
    bool self = false;
    for (std::size_t j = 0; j < comparison.size(); ++j) {
      if (!same_keys(conf, i, comparison, j, rc)) continue;
      if (std::abs(comparison.days[j] - conf.days[i]) > r_avail) continue;
      bool price_ok;
      if (log_price) {
        const double li = std::log(conf.price[i]);
        price_ok = std::abs(std::log(comparison.price[j]) - li) <= r_price * std::abs(li);
      } else {
        price_ok = std::abs(comparison.price[j] - conf.price[i]) <= r_price * conf.price[i];
      }
      if (!price_ok) continue;
      ++c;
      if (j == i) self = true;
    }
    out.true_match[i] = self ? 1 : 0;
    if (c > 0 && self) out.emr += 1.0 / c;
    if (c == 1) {
      ++out.u;
      if (self)
        ++true_unique;
      else
        ++false_unique;
    }
  }
  out.tmr = static_cast<double>(true_unique) / static_cast<double>(conf.size());
  if (out.u > 0) out.fmr = static_cast<double>(false_unique) / static_cast<double>(out.u);
  return out;
}

std::pair<double, double> ecdf_distance(const std::vector<double>& a, const std::vector<double>& b) {
  std::vector<double> merged = a;
  merged.insert(merged.end(), b.begin(), b.end());
  double um = 0.0;
  double ua = 0.0;
  for (double x : merged) {
    double fa = 0.0;
    double fb = 0.0;
    for (double v : a) fa += v <= x ? 1.0 : 0.0;
    for (double v : b) fb += v <= x ? 1.0 : 0.0;
    const double d = fa / static_cast<double>(a.size()) - fb / static_cast<double>(b.size());
    um = std::max(um, std::abs(d));
    ua += d * d;
  }
  return {um, ua / static_cast<double>(merged.size())};
}

double trunc_poisson_pmf(int k, double rate, int upper) {
  std::vector<long double> terms(static_cast<std::size_t>(upper) + 1);
  // Work relative to the largest term to avoid overflow.
  const int mode = std::min(upper, static_cast<int>(std::floor(rate)));
  const long double log_rate = std::log(static_cast<long double>(rate));
  long double sum = 0.0L;
  for (int j = 0; j <= upper; ++j) {
    const long double log_term = (j - mode) * log_rate - std::lgamma(static_cast<long double>(j) + 1.0L) +
                                 std::lgamma(static_cast<long double>(mode) + 1.0L);
    terms[static_cast<std::size_t>(j)] = std::exp(log_term);
    sum += terms[static_cast<std::size_t>(j)];
  }
  return static_cast<double>(terms[static_cast<std::size_t>(k)] / sum);
}

double quantile7(std::vector<double> v, double p) {
  std::sort(v.begin(), v.end());
  const double h = (static_cast<double>(v.size()) - 1.0) * p;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const auto hi = std::min(lo + 1, v.size() - 1);
  return v[lo] + (h - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

}  // namespace partsyn::oracle
