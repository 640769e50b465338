#pragma once

#include <filesystem>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "partsyn/data.hpp"
#include "partsyn/mcmc.hpp"
#include "partsyn/rng.hpp"
#include "partsyn/trunc_poisson.hpp"

namespace partsyn::models {

// ---------------------------------------------------------------------------
// Zero-inflated truncated Poisson model for AvailableDays
//
//   y_i ~ q_i * 0 + (1 - q_i) * Poisson(lambda_i) truncated to {0..365}
//   q_i ~ Bernoulli(p_i)
//   log lambda_i = alpha . x_i + eps_i,  logit p_i = beta . x_i
//   eps_i ~ Normal(0, scale(tau)),  alpha_j, beta_j ~ Normal(0, 1),
//   tau ~ Gamma(0.001, 0.001)

struct ZitpOptions {
  /// false: tau is the precision of eps (scale = tau^-1/2). true: tau is its sd.
  bool tau_is_sd = false;
  double coef_prior_sd = 1.0;
  double tau_shape = 0.001;
  double tau_rate = 0.001;
  int upper = data::kMaxAvailableDays;
};

double epsilon_scale(double tau, const ZitpOptions& options);

/// Full parameter state including per-record latents. Used for fitting only.
struct ZitpParams {
  Eigen::VectorXd alpha;
  Eigen::VectorXd beta;
  double tau = 1.0;
  Eigen::VectorXd eps;
  /// Structural-zero indicators; must be 0 wherever y > 0.
  std::vector<int> z;
};

/// Posterior draw handed to synthesis. Carries no per-record latents, so the
/// synthesis path cannot reproduce a record's own fitted error.
struct ZitpDraw {
  Eigen::VectorXd alpha;
  Eigen::VectorXd beta;
  double tau = 1.0;
};

/// Augmented log posterior with all normalising constants. Returns -inf for
/// tau <= 0 or z_i = 1 with y_i > 0; NaN signals a numerical failure.
double zitp_log_posterior(const ZitpParams& params, const data::DesignMatrix& design, std::span<const int> y,
                          const ZitpOptions& options = {});

/// MCMC target over (alpha, beta, tau, eta) with eta_i = log lambda_i.
/// alpha (and tau under the precision convention) are drawn from their exact
/// conditionals and z by its Bernoulli conditional. beta is updated as one
/// block by Metropolis-Hastings with a Gaussian proposal at the conditional
/// mode (Laplace approximation of the logistic regression on z). eta uses an
/// adaptive random walk with O(1) updates.
class ZitpTarget final : public mcmc::Target {
 public:
  ZitpTarget(const data::DesignMatrix& design, std::vector<int> y, ZitpOptions options = {});

  std::unique_ptr<mcmc::Target> clone() const override;
  std::vector<mcmc::ParameterInfo> parameters() const override;
  std::vector<double> initial_point() const override;
  double log_density(std::span<const double> x) const override;
  void sync(std::span<const double> x) override;
  double delta_log_density(std::span<const double> x, std::size_t j, double value) const override;
  void accept(std::span<double> x, std::size_t j, double value) override;
  void gibbs_update(std::span<double> x, Rng& rng) override;
  std::vector<std::size_t> random_walk_components() const override;

  std::size_t n_coef() const { return p_; }
  /// Converts a chain state to explicit parameters (eps = eta - alpha . x).
  ZitpParams unpack(std::span<const double> x) const;

 private:
  struct Shared;
  std::shared_ptr<const Shared> shared_;
  std::size_t p_ = 0;
  std::size_t n_ = 0;
  // per-chain caches
  Eigen::VectorXd mean_eta_;  // alpha . x_i
  Eigen::VectorXd psi_;       // beta . x_i
  Eigen::VectorXd lik_;       // truncated-Poisson log term at eta_i (constants dropped)
  std::vector<int> z_;
  Eigen::VectorXd beta_mode_;  // Newton warm start
  void update_beta(std::span<double> x, Rng& rng);
  std::size_t beta_accepted_ = 0;
  std::size_t beta_proposed_ = 0;

 public:
  /// Fraction of accepted block proposals for beta in this chain.
  double beta_acceptance() const {
    return beta_proposed_ ? static_cast<double>(beta_accepted_) / static_cast<double>(beta_proposed_) : 0.0;
  }
};

ZitpDraw zitp_draw_from(std::span<const double> tracked_values, std::size_t n_coef);

/// Posterior-predictive draw for one record: fresh eps* ~ Normal(0, scale),
/// lambda = exp(alpha . x + eps*), p = logistic(beta . x); zero with
/// probability p, else a truncated Poisson draw.
int draw_synthetic_days(const ZitpDraw& params, std::span<const double> design_row, Rng& rng,
                        const ZitpOptions& options = {});

// ---------------------------------------------------------------------------
// Log-normal regression for Price
//
//   log y_i ~ Normal(mu_i, sigma),  mu_i = gamma . (x_i, days_i)
//   gamma_j ~ Normal(0, 2),  sigma ~ half-t(1, 1)

struct PriceOptions {
  double coef_prior_sd = 2.0;
  double sigma_prior_df = 1.0;
  double sigma_prior_scale = 1.0;
};

struct PriceParams {
  /// Design coefficients followed by the AvailableDays slope.
  Eigen::VectorXd gamma;
  double sigma = 1.0;
};

double price_log_posterior(const PriceParams& params, const data::DesignMatrix& design, std::span<const int> days,
                           std::span<const double> price, const PriceOptions& options = {});

/// MCMC target over (gamma, sigma): gamma from its Gaussian conditional,
/// sigma by random walk using sufficient statistics.
class PriceTarget final : public mcmc::Target {
 public:
  PriceTarget(const data::DesignMatrix& design, std::span<const int> days, std::span<const double> price,
              PriceOptions options = {});

  std::unique_ptr<mcmc::Target> clone() const override;
  std::vector<mcmc::ParameterInfo> parameters() const override;
  std::vector<double> initial_point() const override;
  double log_density(std::span<const double> x) const override;
  double delta_log_density(std::span<const double> x, std::size_t j, double value) const override;
  void gibbs_update(std::span<double> x, Rng& rng) override;
  std::vector<std::size_t> random_walk_components() const override;

  std::size_t n_coef() const { return q_; }

 private:
  double rss(std::span<const double> gamma) const;
  double log_density_given_rss(std::span<const double> gamma, double sigma, double rss) const;

  struct Shared;
  std::shared_ptr<const Shared> shared_;
  std::size_t q_ = 0;
};

PriceParams price_draw_from(std::span<const double> tracked_values, std::size_t n_coef);

/// mu = gamma . (x, days) with the AvailableDays slot fed by `synthetic_days`;
/// returns exp(Normal(mu, sigma)).
double draw_synthetic_logprice(const PriceParams& params, std::span<const double> design_row, int synthetic_days,
                               Rng& rng);

// ---------------------------------------------------------------------------
// Simulation from known parameters (posterior-recovery checks).

std::vector<int> simulate_days(const data::DesignMatrix& design, const ZitpDraw& truth, Rng& rng,
                               const ZitpOptions& options = {});
std::vector<double> simulate_prices(const data::DesignMatrix& design, std::span<const int> days,
                                    const PriceParams& truth, Rng& rng);

/// Tidy CSV (set,parameter,value) of selected parameter sets.
void write_parameter_sets_csv(const std::vector<std::string>& names, const std::vector<mcmc::ParameterSet>& sets,
                              const std::filesystem::path& path);

}  // namespace partsyn::models
