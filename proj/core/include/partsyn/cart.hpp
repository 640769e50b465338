#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "partsyn/data.hpp"
#include "partsyn/rng.hpp"
#include "partsyn/synthesis.hpp"

namespace partsyn::cart {

struct TreeControls {
  std::size_t min_leaf = 5;
  /// A split must reduce the sum of squares by at least complexity * root SSE.
  double complexity = 1e-8;
  std::size_t max_depth = 30;
};

/// A predictor column. Categorical columns hold level codes 0..levels-1.
struct Predictor {
  std::string name;
  bool categorical = false;
  std::size_t levels = 0;
  std::vector<double> values;
};

struct Node {
  // Internal nodes
  int variable = -1;
  double threshold = 0.0;          // numeric: left when value <= threshold
  std::vector<char> goes_left;     // categorical: per level code
  int left = -1;
  int right = -1;
  std::size_t depth = 0;
  // Leaves
  std::vector<std::size_t> rows;

  bool is_leaf() const { return variable < 0; }
};

class RegressionTree {
 public:
  RegressionTree() = default;
  RegressionTree(std::vector<Node> nodes, std::vector<double> response, TreeControls controls);

  /// Index of the leaf reached by a record with the given predictor values.
  std::size_t route(const std::vector<double>& x) const;
  const Node& node(std::size_t i) const { return nodes_.at(i); }
  std::size_t size() const { return nodes_.size(); }
  std::vector<std::size_t> leaves() const;
  std::size_t depth() const;
  const TreeControls& controls() const { return controls_; }

  /// Uniform draw, with replacement, from the training responses in the leaf.
  double sample_leaf(std::size_t leaf, Rng& rng) const;

 private:
  std::vector<Node> nodes_;
  std::vector<double> response_;
  TreeControls controls_;
};

/// Greedy recursive partitioning on within-node sum of squares. Categorical
/// splits order levels by their mean response and scan prefixes of that order.
/// Throws DataError if there are fewer than 2 * min_leaf rows.
RegressionTree fit_tree(const std::vector<double>& response, const std::vector<Predictor>& predictors,
                        const TreeControls& controls = {});

/// Predictors (RoomType, Neighborhood, ReviewsCount) for a table, coding the
/// categorical levels against `levels`.
std::vector<Predictor> key_predictors(const synthesis::KeyColumns& keys, const data::LevelDictionary& levels);

/// Row i of a predictor set as a vector, in predictor order.
std::vector<double> row_of(const std::vector<Predictor>& predictors, std::size_t i);

struct CartFit {
  RegressionTree days_tree;
  RegressionTree price_tree;
  data::LevelDictionary levels;
};

CartFit fit_cart(const data::Table& table, const TreeControls& controls = {});

/// Sequential leaf-sampling synthesis: AvailableDays from the first tree, then
/// Price from the second tree with each record routed by its synthetic days.
synthesis::SyntheticCollection cart_sequential_synthesize(const data::Table& table, std::size_t m,
                                                          const TreeControls& controls, std::uint64_t seed,
                                                          unsigned threads = 0);

}  // namespace partsyn::cart
