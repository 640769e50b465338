#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "partsyn/rng.hpp"

namespace partsyn::mcmc {

enum class Support { real, positive, unit_interval };

struct ParameterInfo {
  std::string name;
  Support support = Support::real;
  /// Tracked parameters are stored in PosteriorDraws; untracked ones
  /// (per-record latents) are sampled but never leave the chain.
  bool tracked = true;
};

/// A log-density target for `run_chain`.
///
/// The state vector holds constrained values. Random-walk proposals respect
/// the declared support: positive parameters move on the log scale and
/// unit-interval parameters on the logit scale, with the Jacobian folded into
/// the acceptance ratio. Targets with local structure override
/// `delta_log_density` / `accept` so a coordinate update costs O(1) instead of
/// a full evaluation, and may add exact conditional draws in `gibbs_update`.
/// One clone is made per chain, so implementations may keep mutable caches.
class Target {
 public:
  virtual ~Target() = default;

  virtual std::unique_ptr<Target> clone() const = 0;
  virtual std::vector<ParameterInfo> parameters() const = 0;
  virtual std::vector<double> initial_point() const = 0;

  /// Full log density up to an additive constant; -inf outside the support.
  virtual double log_density(std::span<const double> x) const = 0;

  /// Rebuilds caches so that they agree with x. Called before sampling.
  virtual void sync(std::span<const double> x);

  /// log p(x with x[j] = value) - log p(x). Default: two full evaluations.
  virtual double delta_log_density(std::span<const double> x, std::size_t j, double value) const;

  /// Commits x[j] = value and updates caches.
  virtual void accept(std::span<double> x, std::size_t j, double value);

  /// Exact conditional draws for conjugate blocks and discrete latents.
  virtual void gibbs_update(std::span<double> x, Rng& rng);

  /// Coordinates updated by the random-walk sweep. Default: all.
  virtual std::vector<std::size_t> random_walk_components() const;
};

struct AdaptationConfig {
  double target_acceptance = 0.44;
  std::size_t batch = 50;
  double initial_scale = 0.1;
};

enum class SelectionPolicy {
  /// m draws at evenly spaced iterations across the retained chains.
  spaced,
  /// one chain per parameter set; the final draw of each chain.
  independent_chains,
};

struct ChainConfig {
  std::size_t n_chains = 2;
  std::size_t warmup = 5000;
  std::size_t keep = 5000;
  std::size_t thin = 5;
  std::uint64_t seed = 1;
  AdaptationConfig adaptation;
  SelectionPolicy selection = SelectionPolicy::spaced;
  /// Minimum spacing (in retained draws) between selected parameter sets.
  std::size_t min_gap = 1;
  /// Upper bound on concurrently running chains; 0 means hardware concurrency.
  unsigned threads = 0;

  std::size_t retained_per_chain() const { return thin ? keep / thin : 0; }
};

struct PosteriorDraws {
  std::vector<std::string> names;
  /// One matrix per chain: rows are retained iterations, columns parameters.
  std::vector<Eigen::MatrixXd> chains;
  /// Log density at each retained iteration, per chain.
  std::vector<std::vector<double>> log_density;
  /// Random-walk acceptance rate after warmup, per chain and tracked parameter
  /// (NaN for parameters updated only by exact conditional draws).
  std::vector<std::vector<double>> acceptance;

  std::size_t n_chains() const { return chains.size(); }
  std::size_t draws_per_chain() const { return chains.empty() ? 0 : static_cast<std::size_t>(chains[0].rows()); }
  std::size_t index_of(const std::string& name) const;
  /// All chains for one parameter, concatenated in chain order.
  std::vector<double> pooled(std::size_t parameter) const;
};

/// Runs `config.n_chains` chains, each seeded from (seed, chain index).
/// Throws ModelFitError if the initial point has non-finite log density or if
/// no random-walk proposal was accepted during warmup.
PosteriorDraws run_chain(const Target& target, const ChainConfig& config);

struct ParameterDiagnostics {
  std::string name;
  /// Split potential scale reduction; empty when undefined (constant chains).
  std::optional<double> rhat;
  /// Effective sample size; empty when undefined.
  std::optional<double> ess;
  double mean = 0.0;
  double sd = 0.0;
};

struct DiagnosticsReport {
  std::vector<ParameterDiagnostics> parameters;
  double mean_acceptance = 0.0;
  /// Largest defined rhat over parameters.
  double max_rhat = 0.0;
};

/// Requires >= 2 chains with >= 50 retained draws each.
DiagnosticsReport diagnostics(const PosteriorDraws& draws);

/// One parameter set per selected iteration, as a row of tracked values.
struct ParameterSet {
  std::size_t chain = 0;
  /// 1-based retained iteration within the chain.
  std::size_t iteration = 0;
  std::vector<double> values;
};

/// Draws at positions g, 2g, ..., mg (1-based) of the chains laid end to end,
/// with g = floor(total / m). Throws ModelFitError if m exceeds the retained
/// draws or the spacing would fall below `min_gap`.
std::vector<ParameterSet> select_parameter_sets(const PosteriorDraws& draws, std::size_t m,
                                                std::size_t min_gap = 1);

/// The final retained draw of each chain.
std::vector<ParameterSet> last_draw_per_chain(const PosteriorDraws& draws);

/// Tidy dump: chain,iteration,parameter,value.
void write_draws_csv(const PosteriorDraws& draws, const std::filesystem::path& path);

}  // namespace partsyn::mcmc
