#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "partsyn/data.hpp"

namespace partsyn::utility {

struct IntervalEstimate {
  double point = 0.0;
  double lower = 0.0;
  double upper = 0.0;
  double level = 0.95;
};

// ---------------------------------------------------------------------------
// Global utility

struct PropensityResult {
  double up = 0.0;
  bool converged = true;
  std::size_t iterations = 0;
};

/// pMSE of a logistic classifier separating the stacked confidential
/// (label 0) and synthetic (label 1) rows, fitted by IRLS.
PropensityResult propensity_utility(const data::Table& conf, const data::Table& syn);

/// Design used by the propensity classifier for the stacked rows: intercept,
/// reference-coded RoomType and Neighborhood, log1p(ReviewsCount), and
/// standardised AvailableDays and log(Price).
data::RowMatrix propensity_design(const data::Table& conf, const data::Table& syn);

struct LogisticFit {
  Eigen::VectorXd coef;
  Eigen::VectorXd fitted;
  bool converged = false;
  std::size_t iterations = 0;
};

LogisticFit fit_logistic(const data::RowMatrix& x, const Eigen::VectorXd& y, double ridge = 1e-6,
                         std::size_t max_iter = 100, double tol = 1e-10);

/// Cluster-based utility on a row subsample shared by both tables, with
/// UPGMA clustering cut to `clusters` groups.
double cluster_utility(const data::Table& conf, const data::Table& syn, std::size_t clusters, std::size_t subsample,
                       std::uint64_t seed);

/// Mixed-data features for clustering: one-hot categories and standardised
/// log1p(ReviewsCount), AvailableDays and log(Price).
data::RowMatrix cluster_features(const data::Table& conf, const data::Table& syn);

struct Merge {
  std::size_t a = 0;  // any point in the first cluster
  std::size_t b = 0;  // any point in the second cluster
  double height = 0.0;
};

/// Average-linkage agglomeration of the rows of `points` (Euclidean distance)
/// by the nearest-neighbour chain algorithm. Returns n - 1 merges.
std::vector<Merge> upgma(const data::RowMatrix& points);

/// Cluster label 0..k-1 per point after undoing the k - 1 highest merges.
std::vector<std::size_t> cut_tree(std::size_t n_points, std::vector<Merge> merges, std::size_t k);

struct EcdfResult {
  double um = 0.0;
  double ua = 0.0;
};

EcdfResult ecdf_utility(std::span<const double> conf, std::span<const double> syn);

// ---------------------------------------------------------------------------
// Analysis-specific utility

struct CombinedEstimate {
  IntervalEstimate interval;
  double qbar = 0.0;
  double between = 0.0;   // b
  double within = 0.0;    // v-bar
  double total = 0.0;     // T
  std::optional<double> df;  // empty when b = 0 (normal quantile used)
};

CombinedEstimate combine_estimates(std::span<const double> q, std::span<const double> v, double level = 0.95);

/// Linear interpolation between order statistics.
double quantile(std::vector<double> values, double p);

struct BootstrapResult {
  double point = 0.0;
  double variance = 0.0;
};

/// Sample quantile and its variance over B resamples with replacement.
/// Resampling indices depend only on (n, B, seed).
BootstrapResult bootstrap_quantile(std::span<const double> values, double p, std::size_t B, std::uint64_t seed);

/// Empty when either interval has zero width.
std::optional<double> interval_overlap(const IntervalEstimate& conf, const IntervalEstimate& syn);

enum class Variable { available_days, price };

struct Estimand {
  enum class Kind { mean, quantile };
  Kind kind = Kind::mean;
  double p = 0.5;
  Variable variable = Variable::available_days;

  std::string label() const;
  /// Parses "mean:AvailableDays" or "q0.9:Price".
  static Estimand parse(const std::string& text);
};

std::vector<Estimand> default_estimands();

struct EstimandEntry {
  std::string label;
  IntervalEstimate confidential;
  std::vector<IntervalEstimate> replicates;
  CombinedEstimate combined;
  /// Mean of the per-replicate overlaps that are defined; empty if none is.
  std::optional<double> overlap;
  /// Replicates whose overlap is defined (both intervals of positive width).
  std::size_t overlap_defined = 0;
  std::vector<std::optional<double>> replicate_overlaps;
};

struct UtilityOptions {
  std::size_t clusters = 10;
  std::size_t subsample = 2000;
  std::size_t bootstrap = 1000;
  std::uint64_t seed = 1;
  std::vector<Estimand> estimands = default_estimands();
  /// Regress log(Price) instead of Price.
  bool log_price_response = false;
  unsigned threads = 0;
};

EstimandEntry estimand_utility(const data::Table& conf, const std::vector<data::Table>& replicates,
                               const Estimand& estimand, const UtilityOptions& options = {});

struct OlsFit {
  std::vector<std::string> names;
  Eigen::VectorXd coef;
  Eigen::VectorXd variance;
  std::size_t df = 0;
};

/// OLS of Price (or log Price) on intercept, reference-coded RoomType and
/// Neighborhood, ReviewsCount and AvailableDays. Levels come from `levels`.
/// Throws DataError when the design is rank deficient.
OlsFit fit_regression(const data::Table& table, const data::LevelDictionary& levels, bool log_response);

std::vector<EstimandEntry> regression_utility(const data::Table& conf, const std::vector<data::Table>& replicates,
                                              const UtilityOptions& options = {});

struct VariableEcdf {
  std::string variable;
  double um = 0.0;
  double ua = 0.0;
  std::vector<EcdfResult> replicates;
};

struct UtilityReport {
  std::size_t m = 0;
  double up = 0.0;
  std::vector<PropensityResult> propensity;
  double uc = 0.0;
  std::vector<double> cluster;
  std::vector<VariableEcdf> ecdf;
  std::vector<EstimandEntry> estimands;
  std::string regression_response;
  std::vector<EstimandEntry> regression;
};

/// Every measure above, averaged over replicates where applicable.
UtilityReport evaluate_utility(const data::Table& conf, const std::vector<data::Table>& replicates,
                               const UtilityOptions& options = {});

std::string utility_json(const UtilityReport& report);

/// Tidy interval endpoints: kind,label,source,point,lower,upper,overlap.
void write_interval_csv(const UtilityReport& report, const std::filesystem::path& path);

}  // namespace partsyn::utility
