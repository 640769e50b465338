#include "partsyn/cart.hpp"

#include <algorithm>
#include <numeric>
#include <stdexcept>

#include "partsyn/error.hpp"
#include "partsyn/parallel.hpp"

namespace partsyn::cart {
namespace {

struct Split {
  double gain = 0.0;
  int variable = -1;
  double threshold = 0.0;
  std::vector<char> goes_left;
};

struct Moments {
  double n = 0.0;
  double sum = 0.0;
  double sumsq = 0.0;
  void add(double v) {
    n += 1.0;
    sum += v;
    sumsq += v * v;
  }
  double sse() const { return n > 0.0 ? std::max(0.0, sumsq - sum * sum / n) : 0.0; }
};

// Responses are centred on the node mean before accumulation so the sums of
// squares lose little precision.
void best_numeric(const std::vector<double>& y, const Predictor& p, int var, const std::vector<std::size_t>& rows,
                  double mean, std::size_t min_leaf, double parent_sse, Split& best) {
  std::vector<std::size_t> order(rows);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return p.values[a] < p.values[b]; });
  Moments total;
  for (std::size_t r : order) total.add(y[r] - mean);
  Moments left;
  for (std::size_t k = 0; k + 1 < order.size(); ++k) {
    left.add(y[order[k]] - mean);
    const double here = p.values[order[k]];
    const double next = p.values[order[k + 1]];
    if (here == next) continue;
    const std::size_t nl = k + 1;
    const std::size_t nr = order.size() - nl;
    if (nl < min_leaf || nr < min_leaf) continue;
    Moments right{total.n - left.n, total.sum - left.sum, total.sumsq - left.sumsq};
    const double gain = parent_sse - left.sse() - right.sse();
    if (gain > best.gain) {
      best.gain = gain;
      best.variable = var;
      best.threshold = here + (next - here) / 2.0;
      best.goes_left.clear();
    }
  }
}

void best_categorical(const std::vector<double>& y, const Predictor& p, int var, const std::vector<std::size_t>& rows,
                      double mean, std::size_t min_leaf, double parent_sse, Split& best) {
  std::vector<Moments> by_level(p.levels);
  for (std::size_t r : rows) by_level[static_cast<std::size_t>(p.values[r])].add(y[r] - mean);
  std::vector<std::size_t> present;
  for (std::size_t l = 0; l < p.levels; ++l)
    if (by_level[l].n > 0.0) present.push_back(l);
  if (present.size() < 2) return;
  std::stable_sort(present.begin(), present.end(), [&](std::size_t a, std::size_t b) {
    return by_level[a].sum / by_level[a].n < by_level[b].sum / by_level[b].n;
  });
  Moments total;
  for (std::size_t l : present) {
    total.n += by_level[l].n;
    total.sum += by_level[l].sum;
    total.sumsq += by_level[l].sumsq;
  }
  Moments left;
  for (std::size_t k = 0; k + 1 < present.size(); ++k) {
    const auto& m = by_level[present[k]];
    left.n += m.n;
    left.sum += m.sum;
    left.sumsq += m.sumsq;
    if (left.n < static_cast<double>(min_leaf) || total.n - left.n < static_cast<double>(min_leaf)) continue;
    Moments right{total.n - left.n, total.sum - left.sum, total.sumsq - left.sumsq};
    const double gain = parent_sse - left.sse() - right.sse();
    if (gain > best.gain) {
      best.gain = gain;
      best.variable = var;
      best.threshold = 0.0;
      best.goes_left.assign(p.levels, 0);
      for (std::size_t j = 0; j <= k; ++j) best.goes_left[present[j]] = 1;
    }
  }
}

bool goes_left(const Node& node, const Predictor& p, double value) {
  if (p.categorical) {
    const auto code = static_cast<std::size_t>(value);
    return code < node.goes_left.size() && node.goes_left[code];
  }
  return value <= node.threshold;
}

std::size_t level_code(const std::vector<std::string>& levels, const std::string& v) {
  const auto it = std::lower_bound(levels.begin(), levels.end(), v);
  if (it == levels.end() || *it != v) throw DataError("unseen level '" + v + "'");
  return static_cast<std::size_t>(it - levels.begin());
}

}  // namespace

RegressionTree::RegressionTree(std::vector<Node> nodes, std::vector<double> response, TreeControls controls)
    : nodes_(std::move(nodes)), response_(std::move(response)), controls_(controls) {}

std::size_t RegressionTree::route(const std::vector<double>& x) const {
  std::size_t i = 0;
  while (!nodes_[i].is_leaf()) {
    const Node& n = nodes_[i];
    const auto v = static_cast<std::size_t>(n.variable);
    const bool left = n.goes_left.empty() ? x.at(v) <= n.threshold
                                          : (static_cast<std::size_t>(x.at(v)) < n.goes_left.size() &&
                                             n.goes_left[static_cast<std::size_t>(x.at(v))]);
    i = static_cast<std::size_t>(left ? n.left : n.right);
  }
  return i;
}

std::vector<std::size_t> RegressionTree::leaves() const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < nodes_.size(); ++i)
    if (nodes_[i].is_leaf()) out.push_back(i);
  return out;
}

std::size_t RegressionTree::depth() const {
  std::size_t d = 0;
  for (const auto& n : nodes_) d = std::max(d, n.depth);
  return d;
}

double RegressionTree::sample_leaf(std::size_t leaf, Rng& rng) const {
  const auto& rows = nodes_.at(leaf).rows;
  if (rows.empty()) throw std::logic_error("empty leaf");
  std::uniform_int_distribution<std::size_t> pick(0, rows.size() - 1);
  return response_[rows[pick(rng)]];
}

RegressionTree fit_tree(const std::vector<double>& response, const std::vector<Predictor>& predictors,
                        const TreeControls& controls) {
  const std::size_t n = response.size();
  const std::size_t min_leaf = std::max<std::size_t>(1, controls.min_leaf);
  if (n < 2 * min_leaf)
    throw DataError("tree needs at least " + std::to_string(2 * min_leaf) + " rows, got " + std::to_string(n));
  for (const auto& p : predictors) {
    if (p.values.size() != n) throw std::invalid_argument("predictor " + p.name + " has the wrong length");
    if (p.categorical)
      for (double v : p.values)
        if (v < 0.0 || v >= static_cast<double>(p.levels) || v != static_cast<double>(static_cast<std::size_t>(v)))
          throw std::invalid_argument("predictor " + p.name + " has an invalid level code");
  }

  std::vector<Node> nodes(1);
  nodes[0].rows.resize(n);
  std::iota(nodes[0].rows.begin(), nodes[0].rows.end(), std::size_t{0});

  Moments root;
  const double root_mean = std::accumulate(response.begin(), response.end(), 0.0) / static_cast<double>(n);
  for (double v : response) root.add(v - root_mean);
  const double min_gain = controls.complexity * root.sse();

  std::vector<std::size_t> stack{0};
  while (!stack.empty()) {
    const std::size_t id = stack.back();
    stack.pop_back();
    std::vector<std::size_t> rows = nodes[id].rows;
    const std::size_t depth = nodes[id].depth;
    if (rows.size() < 2 * min_leaf || depth >= controls.max_depth) continue;
    const auto [lo, hi] = std::minmax_element(rows.begin(), rows.end(),
                                              [&](std::size_t a, std::size_t b) { return response[a] < response[b]; });
    if (response[*lo] == response[*hi]) continue;

    double mean = 0.0;
    for (std::size_t r : rows) mean += response[r];
    mean /= static_cast<double>(rows.size());
    Moments node;
    for (std::size_t r : rows) node.add(response[r] - mean);
    const double sse = node.sse();

    Split best;
    for (std::size_t v = 0; v < predictors.size(); ++v) {
      const auto& p = predictors[v];
      if (p.categorical)
        best_categorical(response, p, static_cast<int>(v), rows, mean, min_leaf, sse, best);
      else
        best_numeric(response, p, static_cast<int>(v), rows, mean, min_leaf, sse, best);
    }
    if (best.variable < 0 || best.gain <= 0.0 || best.gain < min_gain) continue;

    Node left;
    Node right;
    left.depth = right.depth = depth + 1;
    Node probe;
    probe.threshold = best.threshold;
    probe.goes_left = best.goes_left;
    const auto& p = predictors[static_cast<std::size_t>(best.variable)];
    for (std::size_t r : rows) (goes_left(probe, p, p.values[r]) ? left.rows : right.rows).push_back(r);

    const auto l = static_cast<int>(nodes.size());
    nodes.push_back(std::move(left));
    nodes.push_back(std::move(right));
    Node& parent = nodes[id];
    parent.variable = best.variable;
    parent.threshold = best.threshold;
    parent.goes_left = std::move(best.goes_left);
    parent.left = l;
    parent.right = l + 1;
    parent.rows.clear();
    parent.rows.shrink_to_fit();
    stack.push_back(static_cast<std::size_t>(l + 1));
    stack.push_back(static_cast<std::size_t>(l));
  }
  return RegressionTree(std::move(nodes), response, controls);
}

std::vector<Predictor> key_predictors(const synthesis::KeyColumns& keys, const data::LevelDictionary& levels) {
  const std::size_t n = keys.size();
  Predictor room{std::string(data::kRoomType), true, levels.room_types.size(), std::vector<double>(n)};
  Predictor nb{std::string(data::kNeighborhood), true, levels.neighborhoods.size(), std::vector<double>(n)};
  Predictor rc{std::string(data::kReviewsCount), false, 0, std::vector<double>(n)};
  for (std::size_t i = 0; i < n; ++i) {
    room.values[i] = static_cast<double>(level_code(levels.room_types, keys.room_type[i]));
    nb.values[i] = static_cast<double>(level_code(levels.neighborhoods, keys.neighborhood[i]));
    rc.values[i] = static_cast<double>(keys.reviews[i]);
  }
  return {std::move(room), std::move(nb), std::move(rc)};
}

std::vector<double> row_of(const std::vector<Predictor>& predictors, std::size_t i) {
  std::vector<double> x(predictors.size());
  for (std::size_t v = 0; v < predictors.size(); ++v) x[v] = predictors[v].values[i];
  return x;
}

CartFit fit_cart(const data::Table& table, const TreeControls& controls) {
  table.validate();
  CartFit fit;
  fit.levels = data::LevelDictionary::from(table);
  auto predictors = key_predictors(synthesis::KeyColumns::of(table), fit.levels);
  fit.days_tree = fit_tree(std::vector<double>(table.days.begin(), table.days.end()), predictors, controls);
  predictors.push_back({std::string(data::kAvailableDays), false, 0,
                        std::vector<double>(table.days.begin(), table.days.end())});
  fit.price_tree = fit_tree(table.price, predictors, controls);
  return fit;
}

synthesis::SyntheticCollection cart_sequential_synthesize(const data::Table& table, std::size_t m,
                                                          const TreeControls& controls, std::uint64_t seed,
                                                          unsigned threads) {
  if (m < 2) throw UsageError("m must be at least 2 for the combining rules");
  const auto fit = fit_cart(table, controls);
  auto keys = std::make_shared<const synthesis::KeyColumns>(synthesis::KeyColumns::of(table));
  const auto predictors = key_predictors(*keys, fit.levels);
  const std::size_t n = table.size();

  synthesis::SyntheticCollection out;
  out.replicates.resize(m);
  const std::uint64_t base = mix_seed(seed, 3);
  parallel_for(m, threads, [&](std::size_t l) {
    Rng rng = make_stream(base, l + 1);
    auto& rep = out.replicates[l];
    rep.index = l + 1;
    rep.keys = keys;
    rep.days.resize(n);
    rep.price.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
      const auto x = row_of(predictors, i);
      rep.days[i] = static_cast<int>(fit.days_tree.sample_leaf(fit.days_tree.route(x), rng));
    }
    for (std::size_t i = 0; i < n; ++i) {
      auto x = row_of(predictors, i);
      x.push_back(static_cast<double>(rep.days[i]));
      rep.price[i] = fit.price_tree.sample_leaf(fit.price_tree.route(x), rng);
    }
  });

  auto& p = out.provenance;
  p.seed = seed;
  p.m = m;
  p.method = "cart";
  p.config = {{"m", std::to_string(m)},
              {"seed", std::to_string(seed)},
              {"cart.min_leaf", std::to_string(controls.min_leaf)},
              {"cart.complexity", std::to_string(controls.complexity)},
              {"cart.max_depth", std::to_string(controls.max_depth)}};
  p.config_hash = synthesis::config_hash(p.config);
  return out;
}

}  // namespace partsyn::cart
