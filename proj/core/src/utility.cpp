#include "partsyn/utility.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numeric>
#include <stdexcept>

#include <Eigen/Cholesky>
#include <Eigen/QR>
#include <boost/math/distributions/normal.hpp>
#include <boost/math/distributions/students_t.hpp>
#include <nlohmann/json.hpp>

#include "partsyn/error.hpp"
#include "partsyn/parallel.hpp"
#include "partsyn/rng.hpp"

namespace partsyn::utility {
namespace {

using nlohmann::json;

constexpr std::uint64_t kBootstrapStream = 0xb0075;

double normal_quantile(double p) { return boost::math::quantile(boost::math::normal_distribution<double>(), p); }

double t_quantile(double df, double p) {
  return boost::math::quantile(boost::math::students_t_distribution<double>(df), p);
}

IntervalEstimate symmetric(double point, double half_width, double level) {
  return {point, point - half_width, point + half_width, level};
}

std::vector<double> column(const data::Table& t, Variable v) {
  if (v == Variable::price) return t.price;
  return {t.days.begin(), t.days.end()};
}

std::string variable_name(Variable v) {
  return std::string(v == Variable::price ? data::kPrice : data::kAvailableDays);
}

data::LevelDictionary merged_levels(const data::Table& a, const data::Table& b) {
  data::Table both = a;
  both.neighborhood.insert(both.neighborhood.end(), b.neighborhood.begin(), b.neighborhood.end());
  both.room_type.insert(both.room_type.end(), b.room_type.begin(), b.room_type.end());
  return data::LevelDictionary::from(both);
}

/// Standardises a column in place; a constant column becomes all zeros.
void standardize(Eigen::Ref<Eigen::VectorXd> v) {
  const double mean = v.mean();
  v.array() -= mean;
  const double sd = std::sqrt(v.squaredNorm() / static_cast<double>(std::max<Eigen::Index>(1, v.size() - 1)));
  if (sd > 0.0) v /= sd;
}

std::vector<std::uint32_t> bootstrap_indices(std::size_t n, std::size_t B, std::uint64_t seed) {
  std::vector<std::uint32_t> idx(n * B);
  Rng rng = make_stream(seed, kBootstrapStream);
  std::uniform_int_distribution<std::uint32_t> pick(0, static_cast<std::uint32_t>(n - 1));
  for (auto& i : idx) i = pick(rng);
  return idx;
}

double quantile_in_place(std::vector<double>& v, double p) {
  const double h = static_cast<double>(v.size() - 1) * p;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(lo), v.end());
  const double x_lo = v[lo];
  if (lo + 1 >= v.size()) return x_lo;
  const double x_hi = *std::min_element(v.begin() + static_cast<std::ptrdiff_t>(lo) + 1, v.end());
  return x_lo + (h - static_cast<double>(lo)) * (x_hi - x_lo);
}

BootstrapResult bootstrap_with(std::span<const double> values, double p, std::size_t B,
                               const std::vector<std::uint32_t>& idx) {
  const std::size_t n = values.size();
  BootstrapResult r;
  r.point = quantile(std::vector<double>(values.begin(), values.end()), p);
  std::vector<double> buf(n);
  std::vector<double> stats(B);
  for (std::size_t b = 0; b < B; ++b) {
    const std::uint32_t* row = idx.data() + b * n;
    for (std::size_t i = 0; i < n; ++i) buf[i] = values[row[i]];
    stats[b] = quantile_in_place(buf, p);
  }
  const double mean = std::accumulate(stats.begin(), stats.end(), 0.0) / static_cast<double>(B);
  double ss = 0.0;
  for (double s : stats) ss += (s - mean) * (s - mean);
  r.variance = ss / static_cast<double>(B - 1);
  return r;
}

struct PointVariance {
  double q = 0.0;
  double v = 0.0;
  IntervalEstimate interval;
};

PointVariance estimate(std::span<const double> values, const Estimand& e, std::size_t B,
                       const std::vector<std::uint32_t>& idx) {
  const std::size_t n = values.size();
  if (n < 2) throw DataError("estimand needs at least two records");
  PointVariance out;
  if (e.kind == Estimand::Kind::mean) {
    const double mean = std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(n);
    double ss = 0.0;
    for (double x : values) ss += (x - mean) * (x - mean);
    out.q = mean;
    out.v = ss / static_cast<double>(n - 1) / static_cast<double>(n);
    out.interval = symmetric(mean, t_quantile(static_cast<double>(n - 1), 0.975) * std::sqrt(out.v), 0.95);
  } else {
    const auto b = bootstrap_with(values, e.p, B, idx);
    out.q = b.point;
    out.v = b.variance;
    out.interval = symmetric(b.point, normal_quantile(0.975) * std::sqrt(b.variance), 0.95);
  }
  return out;
}

std::optional<double> mean_overlap(const std::vector<std::optional<double>>& overlaps) {
  double sum = 0.0;
  std::size_t defined = 0;
  for (const auto& o : overlaps) {
    if (!o) continue;
    sum += *o;
    ++defined;
  }
  return defined ? std::optional<double>(sum / static_cast<double>(defined)) : std::nullopt;
}

EstimandEntry assemble(std::string label, const IntervalEstimate& conf, const std::vector<PointVariance>& reps) {
  EstimandEntry e;
  e.label = std::move(label);
  e.confidential = conf;
  std::vector<double> q;
  std::vector<double> v;
  for (const auto& r : reps) {
    e.replicates.push_back(r.interval);
    e.replicate_overlaps.push_back(interval_overlap(conf, r.interval));
    q.push_back(r.q);
    v.push_back(r.v);
  }
  e.combined = combine_estimates(q, v);
  e.overlap = mean_overlap(e.replicate_overlaps);
  e.overlap_defined = static_cast<std::size_t>(
      std::count_if(e.replicate_overlaps.begin(), e.replicate_overlaps.end(), [](const auto& o) { return o.has_value(); }));
  return e;
}

std::string format_real(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

json opt(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

json interval_json(const IntervalEstimate& i) {
  return {{"point", i.point}, {"lower", i.lower}, {"upper", i.upper}, {"level", i.level}};
}

json entry_json(const EstimandEntry& e) {
  json j;
  j["label"] = e.label;
  j["confidential"] = interval_json(e.confidential);
  j["combined"] = interval_json(e.combined.interval);
  j["combined"]["between_variance"] = e.combined.between;
  j["combined"]["within_variance"] = e.combined.within;
  j["combined"]["total_variance"] = e.combined.total;
  j["combined"]["df"] = opt(e.combined.df);
  j["overlap"] = opt(e.overlap);
  j["overlap_defined"] = e.overlap_defined;
  j["replicate_overlaps"] = json::array();
  for (const auto& o : e.replicate_overlaps) j["replicate_overlaps"].push_back(opt(o));
  return j;
}

}  // namespace

// ---------------------------------------------------------------------------
// Propensity

data::RowMatrix propensity_design(const data::Table& conf, const data::Table& syn) {
  const auto levels = merged_levels(conf, syn);
  const data::CodingPolicy coding{.full_room_type = false, .intercept = true};
  const auto dc = data::encode_design(conf, levels, coding);
  const auto ds = data::encode_design(syn, levels, coding);
  const Eigen::Index nc = static_cast<Eigen::Index>(conf.size());
  const Eigen::Index ns = static_cast<Eigen::Index>(syn.size());
  const Eigen::Index p = dc.x.cols();
  data::RowMatrix x(nc + ns, p + 2);
  x.topLeftCorner(nc, p) = dc.x;
  x.bottomLeftCorner(ns, p) = ds.x;
  for (Eigen::Index i = 0; i < nc; ++i) {
    x(i, p) = conf.days[static_cast<std::size_t>(i)];
    x(i, p + 1) = std::log(conf.price[static_cast<std::size_t>(i)]);
  }
  for (Eigen::Index i = 0; i < ns; ++i) {
    x(nc + i, p) = syn.days[static_cast<std::size_t>(i)];
    x(nc + i, p + 1) = std::log(syn.price[static_cast<std::size_t>(i)]);
  }
  Eigen::VectorXd col = x.col(p);
  standardize(col);
  x.col(p) = col;
  col = x.col(p + 1);
  standardize(col);
  x.col(p + 1) = col;
  return x;
}

LogisticFit fit_logistic(const data::RowMatrix& x, const Eigen::VectorXd& y, double ridge, std::size_t max_iter,
                         double tol) {
  const Eigen::Index n = x.rows();
  const Eigen::Index p = x.cols();
  LogisticFit fit;
  fit.coef = Eigen::VectorXd::Zero(p);
  fit.fitted = Eigen::VectorXd::Constant(n, 0.5);
  double deviance = std::numeric_limits<double>::infinity();
  Eigen::VectorXd w(n);
  for (std::size_t it = 1; it <= max_iter; ++it) {
    const Eigen::VectorXd eta = x * fit.coef;
    double dev = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      const double e = std::clamp(eta(i), -35.0, 35.0);
      const double pi = 1.0 / (1.0 + std::exp(-e));
      fit.fitted(i) = pi;
      w(i) = std::max(pi * (1.0 - pi), 1e-12);
      dev -= 2.0 * (y(i) > 0.5 ? std::log(pi) : std::log1p(-pi));
    }
    fit.iterations = it;
    if (std::abs(dev - deviance) <= tol * (std::abs(dev) + 0.1)) {
      fit.converged = true;
      break;
    }
    deviance = dev;
    Eigen::MatrixXd h = x.transpose() * w.asDiagonal() * x;
    h.diagonal().array() += ridge;
    const Eigen::VectorXd g = x.transpose() * (y - fit.fitted) - ridge * fit.coef;
    fit.coef += h.ldlt().solve(g);
  }
  return fit;
}

PropensityResult propensity_utility(const data::Table& conf, const data::Table& syn) {
  if (conf.size() != syn.size()) throw DataError("propensity utility needs equal row counts");
  const auto x = propensity_design(conf, syn);
  Eigen::VectorXd y = Eigen::VectorXd::Zero(x.rows());
  y.tail(static_cast<Eigen::Index>(syn.size())).setOnes();
  const auto fit = fit_logistic(x, y);
  const double c = static_cast<double>(syn.size()) / static_cast<double>(x.rows());
  PropensityResult r;
  r.up = (fit.fitted.array() - c).square().mean();
  r.converged = fit.converged;
  r.iterations = fit.iterations;
  return r;
}

// ---------------------------------------------------------------------------
// Cluster utility

data::RowMatrix cluster_features(const data::Table& conf, const data::Table& syn) {
  const auto levels = merged_levels(conf, syn);
  const std::size_t nr = levels.room_types.size();
  const std::size_t nn = levels.neighborhoods.size();
  const auto n = static_cast<Eigen::Index>(conf.size() + syn.size());
  data::RowMatrix x = data::RowMatrix::Zero(n, static_cast<Eigen::Index>(nr + nn + 3));
  auto code = [](const std::vector<std::string>& lv, const std::string& v) {
    return static_cast<Eigen::Index>(std::lower_bound(lv.begin(), lv.end(), v) - lv.begin());
  };
  Eigen::Index row = 0;
  for (const auto* t : {&conf, &syn}) {
    for (std::size_t i = 0; i < t->size(); ++i, ++row) {
      x(row, code(levels.room_types, t->room_type[i])) = 1.0;
      x(row, static_cast<Eigen::Index>(nr) + code(levels.neighborhoods, t->neighborhood[i])) = 1.0;
      x(row, static_cast<Eigen::Index>(nr + nn)) = data::transform_reviews(t->reviews[i]);
      x(row, static_cast<Eigen::Index>(nr + nn + 1)) = t->days[i];
      x(row, static_cast<Eigen::Index>(nr + nn + 2)) = std::log(t->price[i]);
    }
  }
  for (Eigen::Index j = static_cast<Eigen::Index>(nr + nn); j < x.cols(); ++j) {
    Eigen::VectorXd col = x.col(j);
    standardize(col);
    x.col(j) = col;
  }
  return x;
}

double cluster_utility(const data::Table& conf, const data::Table& syn, std::size_t clusters, std::size_t subsample,
                       std::uint64_t seed) {
  if (conf.size() != syn.size()) throw DataError("cluster utility needs equal row counts");
  if (clusters == 0) throw std::invalid_argument("cluster count must be positive");
  const std::size_t n = conf.size();
  const std::size_t k = std::min(subsample, n);
  std::vector<std::size_t> rows(n);
  std::iota(rows.begin(), rows.end(), std::size_t{0});
  if (k < n) {
    Rng rng = make_stream(seed, 0xc105);
    for (std::size_t i = 0; i < k; ++i) {
      std::uniform_int_distribution<std::size_t> pick(i, n - 1);
      std::swap(rows[i], rows[pick(rng)]);
    }
    rows.resize(k);
    std::sort(rows.begin(), rows.end());
  }
  const auto points = cluster_features(data::take_rows(conf, rows), data::take_rows(syn, rows));
  const std::size_t total = 2 * k;
  if (clusters > total) throw std::invalid_argument("more clusters than points");
  const auto labels = cut_tree(total, upgma(points), clusters);

  std::vector<double> size(clusters, 0.0);
  std::vector<double> synthetic(clusters, 0.0);
  for (std::size_t i = 0; i < total; ++i) {
    size[labels[i]] += 1.0;
    if (i >= k) synthetic[labels[i]] += 1.0;
  }
  const double c = static_cast<double>(k) / static_cast<double>(total);
  double uc = 0.0;
  for (std::size_t g = 0; g < clusters; ++g) {
    const double share = synthetic[g] / size[g] - c;
    uc += size[g] / static_cast<double>(total) * share * share;
  }
  return uc / static_cast<double>(clusters);
}

std::vector<Merge> upgma(const data::RowMatrix& points) {
  const std::size_t n = static_cast<std::size_t>(points.rows());
  std::vector<Merge> merges;
  if (n < 2) return merges;
  merges.reserve(n - 1);

  std::vector<double> d(n * (n - 1) / 2);
  auto at = [n](std::size_t i, std::size_t j) {
    if (i > j) std::swap(i, j);
    return i * n - i * (i + 1) / 2 + (j - i - 1);
  };
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j)
      d[at(i, j)] = (points.row(static_cast<Eigen::Index>(i)) - points.row(static_cast<Eigen::Index>(j))).norm();

  std::vector<char> active(n, 1);
  std::vector<double> size(n, 1.0);
  std::vector<std::size_t> chain;
  std::size_t first_active = 0;
  while (merges.size() + 1 < n) {
    if (chain.empty()) {
      while (!active[first_active]) ++first_active;
      chain.push_back(first_active);
    }
    std::size_t a = 0;
    std::size_t b = 0;
    double best = 0.0;
    for (;;) {
      a = chain.back();
      const bool has_prev = chain.size() >= 2;
      b = has_prev ? chain[chain.size() - 2] : n;
      best = has_prev ? d[at(a, b)] : std::numeric_limits<double>::infinity();
      for (std::size_t c = 0; c < n; ++c) {
        if (!active[c] || c == a) continue;
        const double dc = d[at(a, c)];
        if (dc < best) {
          best = dc;
          b = c;
        }
      }
      if (has_prev && b == chain[chain.size() - 2]) break;
      chain.push_back(b);
    }
    chain.pop_back();
    chain.pop_back();
    merges.push_back({a, b, best});
    // The merged cluster takes b's slot.
    const double na = size[a];
    const double nb = size[b];
    for (std::size_t k = 0; k < n; ++k) {
      if (!active[k] || k == a || k == b) continue;
      d[at(b, k)] = (na * d[at(a, k)] + nb * d[at(b, k)]) / (na + nb);
    }
    size[b] = na + nb;
    active[a] = 0;
  }
  return merges;
}

std::vector<std::size_t> cut_tree(std::size_t n_points, std::vector<Merge> merges, std::size_t k) {
  if (k == 0 || k > n_points) throw std::invalid_argument("cluster count out of range");
  if (merges.size() + 1 != n_points) throw std::invalid_argument("merge list does not span the points");
  std::stable_sort(merges.begin(), merges.end(), [](const Merge& x, const Merge& y) { return x.height < y.height; });
  std::vector<std::size_t> parent(n_points);
  std::iota(parent.begin(), parent.end(), std::size_t{0});
  auto find = [&](std::size_t i) {
    while (parent[i] != i) i = parent[i] = parent[parent[i]];
    return i;
  };
  for (std::size_t m = 0; m < n_points - k; ++m) {
    const auto ra = find(merges[m].a);
    const auto rb = find(merges[m].b);
    if (ra != rb) parent[std::max(ra, rb)] = std::min(ra, rb);
  }
  std::vector<std::size_t> label(n_points);
  std::vector<std::size_t> root_label(n_points, n_points);
  std::size_t next = 0;
  for (std::size_t i = 0; i < n_points; ++i) {
    const auto r = find(i);
    if (root_label[r] == n_points) root_label[r] = next++;
    label[i] = root_label[r];
  }
  return label;
}

// ---------------------------------------------------------------------------
// eCDF

EcdfResult ecdf_utility(std::span<const double> conf, std::span<const double> syn) {
  if (conf.empty() || syn.empty()) throw DataError("eCDF utility needs non-empty columns");
  std::vector<double> a(conf.begin(), conf.end());
  std::vector<double> b(syn.begin(), syn.end());
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  const double na = static_cast<double>(a.size());
  const double nb = static_cast<double>(b.size());
  EcdfResult r;
  double sum = 0.0;
  std::size_t i = 0;
  std::size_t j = 0;
  while (i < a.size() || j < b.size()) {
    const double x = j >= b.size() || (i < a.size() && a[i] <= b[j]) ? a[i] : b[j];
    std::size_t ties = 0;
    while (i < a.size() && a[i] == x) ++i, ++ties;
    while (j < b.size() && b[j] == x) ++j, ++ties;
    const double diff = static_cast<double>(i) / na - static_cast<double>(j) / nb;
    r.um = std::max(r.um, std::abs(diff));
    sum += static_cast<double>(ties) * diff * diff;
  }
  r.ua = sum / (na + nb);
  return r;
}

// ---------------------------------------------------------------------------
// Combining rules, quantiles, overlap

CombinedEstimate combine_estimates(std::span<const double> q, std::span<const double> v, double level) {
  const std::size_t m = q.size();
  if (m < 2 || v.size() != m) throw std::invalid_argument("combining rules need m >= 2 paired estimates");
  for (double x : v)
    if (!(x >= 0.0)) throw std::invalid_argument("variance estimates must be non-negative");
  const double md = static_cast<double>(m);
  CombinedEstimate c;
  c.qbar = std::accumulate(q.begin(), q.end(), 0.0) / md;
  double ss = 0.0;
  for (double x : q) ss += (x - c.qbar) * (x - c.qbar);
  c.between = ss / (md - 1.0);
  c.within = std::accumulate(v.begin(), v.end(), 0.0) / md;
  c.total = c.within + c.between / md;
  const double alpha = 1.0 - level;
  double crit = 0.0;
  if (c.between > 0.0) {
    const double r = c.within / (c.between / md);
    c.df = (md - 1.0) * (1.0 + r) * (1.0 + r);
    crit = t_quantile(*c.df, 1.0 - alpha / 2.0);
  } else {
    crit = normal_quantile(1.0 - alpha / 2.0);
  }
  c.interval = symmetric(c.qbar, crit * std::sqrt(c.total), level);
  return c;
}

double quantile(std::vector<double> values, double p) {
  if (values.empty()) throw DataError("quantile of an empty column");
  if (!(p >= 0.0 && p <= 1.0)) throw std::invalid_argument("quantile level outside [0, 1]");
  return quantile_in_place(values, p);
}

BootstrapResult bootstrap_quantile(std::span<const double> values, double p, std::size_t B, std::uint64_t seed) {
  if (values.empty()) throw DataError("bootstrap of an empty column");
  if (B < 2) throw std::invalid_argument("bootstrap needs at least two resamples");
  return bootstrap_with(values, p, B, bootstrap_indices(values.size(), B, seed));
}

std::optional<double> interval_overlap(const IntervalEstimate& conf, const IntervalEstimate& syn) {
  const double wc = conf.upper - conf.lower;
  const double ws = syn.upper - syn.lower;
  if (!(wc > 0.0) || !(ws > 0.0)) return std::nullopt;
  const double inter = std::min(conf.upper, syn.upper) - std::max(conf.lower, syn.lower);
  return inter / (2.0 * wc) + inter / (2.0 * ws);
}

// ---------------------------------------------------------------------------
// Estimands

std::string Estimand::label() const {
  if (kind == Kind::mean) return "mean:" + variable_name(variable);
  return "q" + format_real(p) + ":" + variable_name(variable);
}

Estimand Estimand::parse(const std::string& text) {
  const auto colon = text.find(':');
  if (colon == std::string::npos) throw UsageError("estimand '" + text + "' is not of the form stat:Variable");
  const std::string stat = text.substr(0, colon);
  const std::string var = text.substr(colon + 1);
  Estimand e;
  if (var == data::kAvailableDays) {
    e.variable = Variable::available_days;
  } else if (var == data::kPrice) {
    e.variable = Variable::price;
  } else {
    throw UsageError("estimand variable must be AvailableDays or Price, got '" + var + "'");
  }
  if (stat == "mean") {
    e.kind = Kind::mean;
    return e;
  }
  double p = -1.0;
  if (stat.size() > 1 && stat[0] == 'q') {
    const auto res = std::from_chars(stat.data() + 1, stat.data() + stat.size(), p);
    if (res.ec != std::errc() || res.ptr != stat.data() + stat.size()) p = -1.0;
  }
  if (!(p > 0.0 && p < 1.0)) throw UsageError("estimand statistic must be 'mean' or 'q<p>' with 0<p<1: '" + stat + "'");
  e.kind = Kind::quantile;
  e.p = p;
  return e;
}

std::vector<Estimand> default_estimands() {
  std::vector<Estimand> out;
  for (auto v : {Variable::available_days, Variable::price}) {
    out.push_back({Estimand::Kind::mean, 0.5, v});
    out.push_back({Estimand::Kind::quantile, 0.25, v});
    out.push_back({Estimand::Kind::quantile, 0.9, v});
  }
  return out;
}

EstimandEntry estimand_utility(const data::Table& conf, const std::vector<data::Table>& replicates,
                               const Estimand& estimand, const UtilityOptions& options) {
  if (replicates.size() < 2) throw std::invalid_argument("estimand utility needs at least two replicates");
  if (estimand.kind == Estimand::Kind::quantile && options.bootstrap < 200)
    throw std::invalid_argument("bootstrap needs at least 200 resamples");
  const std::size_t n = conf.size();
  for (const auto& r : replicates)
    if (r.size() != n) throw DataError("replicate row count differs from the confidential table");
  std::vector<std::uint32_t> idx;
  if (estimand.kind == Estimand::Kind::quantile) idx = bootstrap_indices(n, options.bootstrap, options.seed);

  const auto c = estimate(column(conf, estimand.variable), estimand, options.bootstrap, idx);
  std::vector<PointVariance> reps(replicates.size());
  parallel_for(replicates.size(), options.threads, [&](std::size_t l) {
    reps[l] = estimate(column(replicates[l], estimand.variable), estimand, options.bootstrap, idx);
  });
  return assemble(estimand.label(), c.interval, reps);
}

// ---------------------------------------------------------------------------
// Regression

OlsFit fit_regression(const data::Table& table, const data::LevelDictionary& levels, bool log_response) {
  const data::CodingPolicy coding{.full_room_type = false, .intercept = true};
  const auto d = data::encode_design(table, levels, coding);
  const Eigen::Index n = d.x.rows();
  const Eigen::Index p = d.x.cols() + 1;
  Eigen::MatrixXd x(n, p);
  x.leftCols(p - 1) = d.x;
  Eigen::VectorXd y(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto r = static_cast<std::size_t>(i);
    x(i, p - 2) = static_cast<double>(table.reviews[r]);
    x(i, p - 1) = table.days[r];
    y(i) = log_response ? std::log(table.price[r]) : table.price[r];
  }
  OlsFit fit;
  fit.names = d.column_names;
  fit.names.back() = std::string(data::kReviewsCount);
  fit.names.emplace_back(data::kAvailableDays);
  if (n <= p) throw DataError("regression needs more rows than coefficients");
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(x);
  if (qr.rank() < p) throw DataError("regression design is rank deficient");
  fit.coef = qr.solve(y);
  fit.df = static_cast<std::size_t>(n - p);
  const double sigma2 = (y - x * fit.coef).squaredNorm() / static_cast<double>(fit.df);
  const Eigen::MatrixXd xtx_inv = (x.transpose() * x).ldlt().solve(Eigen::MatrixXd::Identity(p, p));
  fit.variance = sigma2 * xtx_inv.diagonal();
  return fit;
}

std::vector<EstimandEntry> regression_utility(const data::Table& conf, const std::vector<data::Table>& replicates,
                                              const UtilityOptions& options) {
  if (replicates.size() < 2) throw std::invalid_argument("regression utility needs at least two replicates");
  const auto levels = data::LevelDictionary::from(conf);
  const auto c = fit_regression(conf, levels, options.log_price_response);
  std::vector<OlsFit> fits(replicates.size());
  parallel_for(replicates.size(), options.threads, [&](std::size_t l) {
    fits[l] = fit_regression(replicates[l], levels, options.log_price_response);
  });

  std::vector<EstimandEntry> out;
  const double crit = t_quantile(static_cast<double>(c.df), 0.975);
  for (std::size_t j = 0; j < c.names.size(); ++j) {
    const auto jj = static_cast<Eigen::Index>(j);
    const auto conf_iv = symmetric(c.coef(jj), crit * std::sqrt(c.variance(jj)), 0.95);
    std::vector<PointVariance> reps;
    for (const auto& f : fits) {
      const double crit_l = t_quantile(static_cast<double>(f.df), 0.975);
      reps.push_back({f.coef(jj), f.variance(jj), symmetric(f.coef(jj), crit_l * std::sqrt(f.variance(jj)), 0.95)});
    }
    out.push_back(assemble(c.names[j], conf_iv, reps));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Report

UtilityReport evaluate_utility(const data::Table& conf, const std::vector<data::Table>& replicates,
                               const UtilityOptions& options) {
  const std::size_t m = replicates.size();
  if (m < 2) throw std::invalid_argument("utility evaluation needs at least two replicates");
  for (std::size_t l = 0; l < m; ++l)
    if (replicates[l].size() != conf.size())
      throw DataError("replicate " + std::to_string(l + 1) + " has " + std::to_string(replicates[l].size()) +
                      " rows, expected " + std::to_string(conf.size()));

  UtilityReport r;
  r.m = m;
  r.propensity.resize(m);
  r.cluster.resize(m);
  std::vector<EcdfResult> days(m);
  std::vector<EcdfResult> price(m);
  const auto conf_days = column(conf, Variable::available_days);
  parallel_for(m, options.threads, [&](std::size_t l) {
    r.propensity[l] = propensity_utility(conf, replicates[l]);
    r.cluster[l] = cluster_utility(conf, replicates[l], options.clusters, options.subsample, options.seed);
    days[l] = ecdf_utility(conf_days, column(replicates[l], Variable::available_days));
    price[l] = ecdf_utility(conf.price, replicates[l].price);
  });
  const double md = static_cast<double>(m);
  for (std::size_t l = 0; l < m; ++l) {
    r.up += r.propensity[l].up / md;
    r.uc += r.cluster[l] / md;
  }
  for (auto [name, res] : {std::pair{data::kAvailableDays, &days}, std::pair{data::kPrice, &price}}) {
    VariableEcdf v;
    v.variable = std::string(name);
    v.replicates = *res;
    for (const auto& e : *res) {
      v.um += e.um / md;
      v.ua += e.ua / md;
    }
    r.ecdf.push_back(std::move(v));
  }
  for (const auto& e : options.estimands) r.estimands.push_back(estimand_utility(conf, replicates, e, options));
  r.regression_response = options.log_price_response ? "log(Price)" : "Price";
  r.regression = regression_utility(conf, replicates, options);
  return r;
}

std::string utility_json(const UtilityReport& r) {
  json j;
  j["schema_version"] = 1;
  j["m"] = r.m;
  bool converged = true;
  json up = json::array();
  for (const auto& p : r.propensity) {
    up.push_back(p.up);
    converged = converged && p.converged;
  }
  j["propensity"] = {{"Up", r.up}, {"per_replicate", up}, {"all_converged", converged}};
  j["cluster"] = {{"Uc", r.uc}, {"per_replicate", r.cluster}};
  j["ecdf"] = json::array();
  for (const auto& v : r.ecdf) {
    json um = json::array();
    json ua = json::array();
    for (const auto& e : v.replicates) {
      um.push_back(e.um);
      ua.push_back(e.ua);
    }
    j["ecdf"].push_back({{"variable", v.variable}, {"Um", v.um}, {"Ua", v.ua}, {"Um_per_replicate", um},
                         {"Ua_per_replicate", ua}});
  }
  j["estimands"] = json::array();
  for (const auto& e : r.estimands) j["estimands"].push_back(entry_json(e));
  j["regression"] = {{"response", r.regression_response}, {"coefficients", json::array()}};
  for (const auto& e : r.regression) j["regression"]["coefficients"].push_back(entry_json(e));
  return j.dump(2) + "\n";
}

void write_interval_csv(const UtilityReport& report, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path.string());
  out << "kind,label,source,point,lower,upper,overlap\n";
  auto row = [&](const char* kind, const std::string& label, const std::string& source, const IntervalEstimate& i,
                 const std::optional<double>& overlap) {
    out << kind << ",\"" << label << "\"," << source << ',' << format_real(i.point) << ',' << format_real(i.lower)
        << ',' << format_real(i.upper) << ',' << (overlap ? format_real(*overlap) : std::string("NA")) << '\n';
  };
  for (const auto* group : {&report.estimands, &report.regression}) {
    const char* kind = group == &report.estimands ? "estimand" : "coefficient";
    for (const auto& e : *group) {
      row(kind, e.label, "confidential", e.confidential, std::nullopt);
      for (std::size_t l = 0; l < e.replicates.size(); ++l)
        row(kind, e.label, "synthetic_" + std::to_string(l + 1), e.replicates[l], e.replicate_overlaps[l]);
      row(kind, e.label, "combined", e.combined.interval, e.overlap);
    }
  }
}

}  // namespace partsyn::utility
