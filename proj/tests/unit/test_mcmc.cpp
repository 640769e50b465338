#include <gtest/gtest.h>

#include <cmath>
#include <numeric>
#include <set>

#include "partsyn/error.hpp"
#include "partsyn/mcmc.hpp"
#include "scratch.hpp"

using namespace partsyn;
using namespace partsyn::mcmc;

namespace {

class StandardNormal final : public Target {
 public:
  std::unique_ptr<Target> clone() const override { return std::make_unique<StandardNormal>(*this); }
  std::vector<ParameterInfo> parameters() const override { return {{"x", Support::real, true}}; }
  std::vector<double> initial_point() const override { return {0.5}; }
  double log_density(std::span<const double> x) const override { return -0.5 * x[0] * x[0]; }
};

/// y_i ~ Normal(mu, 1), mu ~ Normal(0, prior_sd): posterior is Normal in closed form.
class NormalMean final : public Target {
 public:
  NormalMean(std::vector<double> y, double prior_sd) : y_(std::move(y)), prior_sd_(prior_sd) {}
  std::unique_ptr<Target> clone() const override { return std::make_unique<NormalMean>(*this); }
  std::vector<ParameterInfo> parameters() const override { return {{"mu", Support::real, true}}; }
  std::vector<double> initial_point() const override { return {0.0}; }
  double log_density(std::span<const double> x) const override {
    double lp = -0.5 * x[0] * x[0] / (prior_sd_ * prior_sd_);
    for (double v : y_) lp -= 0.5 * (v - x[0]) * (v - x[0]);
    return lp;
  }

 private:
  std::vector<double> y_;
  double prior_sd_;
};

/// Exponential(1) on a positive parameter; the sampler moves it on the log scale.
class Exponential final : public Target {
 public:
  std::unique_ptr<Target> clone() const override { return std::make_unique<Exponential>(*this); }
  std::vector<ParameterInfo> parameters() const override { return {{"s", Support::positive, true}}; }
  std::vector<double> initial_point() const override { return {1.0}; }
  double log_density(std::span<const double> x) const override {
    return x[0] > 0.0 ? -x[0] : -std::numeric_limits<double>::infinity();
  }
};

/// Beta(2, 5) on the unit interval.
class BetaTarget final : public Target {
 public:
  std::unique_ptr<Target> clone() const override { return std::make_unique<BetaTarget>(*this); }
  std::vector<ParameterInfo> parameters() const override { return {{"p", Support::unit_interval, true}}; }
  std::vector<double> initial_point() const override { return {0.5}; }
  double log_density(std::span<const double> x) const override {
    if (!(x[0] > 0.0 && x[0] < 1.0)) return -std::numeric_limits<double>::infinity();
    return std::log(x[0]) + 4.0 * std::log1p(-x[0]);
  }
};

class Flat final : public Target {
 public:
  std::unique_ptr<Target> clone() const override { return std::make_unique<Flat>(*this); }
  std::vector<ParameterInfo> parameters() const override { return {{"x", Support::real, true}}; }
  std::vector<double> initial_point() const override { return {0.0}; }
  double log_density(std::span<const double> x) const override {
    return x[0] == 0.0 ? 0.0 : -std::numeric_limits<double>::infinity();
  }
};

class NotFinite final : public Target {
 public:
  std::unique_ptr<Target> clone() const override { return std::make_unique<NotFinite>(*this); }
  std::vector<ParameterInfo> parameters() const override { return {{"x", Support::real, true}}; }
  std::vector<double> initial_point() const override { return {0.0}; }
  double log_density(std::span<const double>) const override { return std::nan(""); }
};

double mean(const std::vector<double>& v) { return std::accumulate(v.begin(), v.end(), 0.0) / v.size(); }
double sd(const std::vector<double>& v) {
  const double mu = mean(v);
  double s = 0.0;
  for (double x : v) s += (x - mu) * (x - mu);
  return std::sqrt(s / (v.size() - 1));
}

PosteriorDraws synthetic_draws(const std::vector<std::vector<double>>& chains) {
  PosteriorDraws d;
  d.names = {"theta"};
  for (const auto& c : chains) {
    Eigen::MatrixXd m(static_cast<Eigen::Index>(c.size()), 1);
    for (std::size_t i = 0; i < c.size(); ++i) m(static_cast<Eigen::Index>(i), 0) = c[i];
    d.chains.push_back(m);
    d.log_density.emplace_back(c.size(), 0.0);
    d.acceptance.push_back({0.4});
  }
  return d;
}

}  // namespace

TEST(RunChain, StandardNormalMoments) {
  ChainConfig cfg;
  cfg.n_chains = 1;
  cfg.warmup = 2000;
  cfg.keep = 50000;
  cfg.thin = 10;
  cfg.seed = 3;
  const auto draws = run_chain(StandardNormal{}, cfg);
  ASSERT_EQ(draws.draws_per_chain(), 5000u);
  const auto x = draws.pooled(0);
  EXPECT_NEAR(mean(x), 0.0, 0.05);
  EXPECT_NEAR(sd(x), 1.0, 0.05);
  EXPECT_EQ(draws.log_density[0].size(), 5000u);
}

TEST(RunChain, SeedDeterminism) {
  ChainConfig cfg;
  cfg.warmup = 200;
  cfg.keep = 500;
  cfg.thin = 1;
  cfg.seed = 11;
  const auto a = run_chain(StandardNormal{}, cfg);
  const auto b = run_chain(StandardNormal{}, cfg);
  ASSERT_EQ(a.chains.size(), b.chains.size());
  for (std::size_t c = 0; c < a.chains.size(); ++c) EXPECT_EQ(a.chains[c], b.chains[c]);
  cfg.threads = 1;
  const auto serial = run_chain(StandardNormal{}, cfg);
  for (std::size_t c = 0; c < a.chains.size(); ++c) EXPECT_EQ(a.chains[c], serial.chains[c]);
  cfg.seed = 12;
  const auto other = run_chain(StandardNormal{}, cfg);
  EXPECT_NE(a.chains[0], other.chains[0]);
}

TEST(RunChain, ConjugateNormalMeanMatchesClosedForm) {
  std::vector<double> y;
  auto rng = make_stream(99, 0);
  std::normal_distribution<double> normal(1.5, 1.0);
  for (int i = 0; i < 40; ++i) y.push_back(normal(rng));
  const double prior_sd = 2.0;
  const double post_prec = 1.0 / (prior_sd * prior_sd) + static_cast<double>(y.size());
  const double post_mean = std::accumulate(y.begin(), y.end(), 0.0) / post_prec;
  const double post_sd = 1.0 / std::sqrt(post_prec);

  ChainConfig cfg;
  cfg.n_chains = 2;
  cfg.warmup = 2000;
  cfg.keep = 40000;
  cfg.thin = 10;
  cfg.seed = 4;
  const auto draws = run_chain(NormalMean(y, prior_sd), cfg);
  const auto mu = draws.pooled(0);
  const auto report = diagnostics(draws);
  const double se = post_sd / std::sqrt(*report.parameters[0].ess);
  EXPECT_NEAR(mean(mu), post_mean, 3.0 * se);
  EXPECT_NEAR(sd(mu), post_sd, 0.05 * post_sd);
}

TEST(RunChain, PositiveAndUnitIntervalSupports) {
  ChainConfig cfg;
  cfg.n_chains = 1;
  cfg.warmup = 2000;
  cfg.keep = 40000;
  cfg.thin = 4;
  const auto e = run_chain(Exponential{}, cfg);
  const auto s = e.pooled(0);
  for (double v : s) ASSERT_GT(v, 0.0);
  EXPECT_NEAR(mean(s), 1.0, 0.06);

  const auto b = run_chain(BetaTarget{}, cfg);
  const auto p = b.pooled(0);
  for (double v : p) ASSERT_TRUE(v > 0.0 && v < 1.0);
  EXPECT_NEAR(mean(p), 2.0 / 7.0, 0.015);
}

TEST(RunChain, Errors) {
  ChainConfig cfg;
  cfg.warmup = 100;
  cfg.keep = 100;
  EXPECT_THROW(run_chain(NotFinite{}, cfg), ModelFitError);
  EXPECT_THROW(run_chain(Flat{}, cfg), ModelFitError);
}

TEST(Diagnostics, IidChainsHaveRhatNearOne) {
  auto rng = make_stream(1, 1);
  std::normal_distribution<double> normal;
  std::vector<std::vector<double>> chains(4, std::vector<double>(1000));
  for (auto& c : chains)
    for (double& v : c) v = normal(rng);
  const auto r = diagnostics(synthetic_draws(chains));
  ASSERT_TRUE(r.parameters[0].rhat);
  EXPECT_GE(*r.parameters[0].rhat, 0.99);
  EXPECT_LE(*r.parameters[0].rhat, 1.05);
  ASSERT_TRUE(r.parameters[0].ess);
  EXPECT_GT(*r.parameters[0].ess, 2000.0);
}

TEST(Diagnostics, DisjointChainsHaveLargeRhat) {
  auto rng = make_stream(1, 2);
  std::normal_distribution<double> normal;
  std::vector<std::vector<double>> chains(2, std::vector<double>(200));
  for (std::size_t c = 0; c < 2; ++c)
    for (double& v : chains[c]) v = 100.0 * static_cast<double>(c) + normal(rng);
  const auto r = diagnostics(synthetic_draws(chains));
  EXPECT_GT(*r.parameters[0].rhat, 5.0);
}

TEST(Diagnostics, ConstantChainIsFlaggedNotFatal) {
  const auto r = diagnostics(synthetic_draws({std::vector<double>(100, 3.0), std::vector<double>(100, 3.0)}));
  EXPECT_FALSE(r.parameters[0].rhat);
  EXPECT_FALSE(r.parameters[0].ess);
}

TEST(Diagnostics, InsufficientDraws) {
  EXPECT_THROW(diagnostics(synthetic_draws({std::vector<double>(100, 1.0)})), ModelFitError);
  EXPECT_THROW(diagnostics(synthetic_draws({std::vector<double>(49, 1.0), std::vector<double>(49, 2.0)})),
               ModelFitError);
}

TEST(SelectParameterSets, EvenSpacing) {
  std::vector<double> c(100);
  std::iota(c.begin(), c.end(), 1.0);
  const auto draws = synthetic_draws({c});
  const auto sets = select_parameter_sets(draws, 4);
  ASSERT_EQ(sets.size(), 4u);
  const std::vector<std::size_t> expected = {25, 50, 75, 100};
  for (std::size_t k = 0; k < 4; ++k) {
    EXPECT_EQ(sets[k].iteration, expected[k]);
    EXPECT_EQ(sets[k].values[0], static_cast<double>(expected[k]));
  }
  const auto one = select_parameter_sets(draws, 1);
  ASSERT_EQ(one.size(), 1u);
  EXPECT_EQ(one[0].iteration, 100u);
}

TEST(SelectParameterSets, AcrossChainsAndErrors) {
  std::vector<double> c(1000);
  std::iota(c.begin(), c.end(), 0.0);
  const auto draws = synthetic_draws({c, c});
  const auto sets = select_parameter_sets(draws, 20);
  ASSERT_EQ(sets.size(), 20u);
  std::set<std::pair<std::size_t, std::size_t>> seen;
  for (const auto& s : sets) seen.insert({s.chain, s.iteration});
  EXPECT_EQ(seen.size(), 20u);
  EXPECT_EQ(sets[9].chain, 0u);
  EXPECT_EQ(sets[10].chain, 1u);
  EXPECT_THROW(select_parameter_sets(draws, 2001), ModelFitError);
  EXPECT_THROW(select_parameter_sets(draws, 20, 101), ModelFitError);

  const auto last = last_draw_per_chain(draws);
  ASSERT_EQ(last.size(), 2u);
  EXPECT_EQ(last[1].iteration, 1000u);
}

TEST(WriteDraws, TidyCsv) {
  partsyn::testing::ScratchDir dir("draws");
  write_draws_csv(synthetic_draws({{1.0, 2.0}, {3.0, 4.0}}), dir / "d.csv");
  EXPECT_EQ(partsyn::testing::read_file(dir / "d.csv"),
            "chain,iteration,parameter,value\n1,1,theta,1\n1,2,theta,2\n2,1,theta,3\n2,2,theta,4\n");
}
