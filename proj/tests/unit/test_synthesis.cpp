#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "partsyn/error.hpp"
#include "partsyn/synthesis.hpp"
#include "scratch.hpp"
#include "surrogate.hpp"

using namespace partsyn;
using namespace partsyn::synthesis;
using partsyn::testing::ScratchDir;

namespace {

std::vector<double> ranks(const std::vector<double>& v) {
  std::vector<std::size_t> order(v.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
  std::vector<double> r(v.size());
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j + 1 < order.size() && v[order[j + 1]] == v[order[i]]) ++j;
    const double avg = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t k = i; k <= j; ++k) r[order[k]] = avg;
    i = j + 1;
  }
  return r;
}

double spearman(const std::vector<double>& a, const std::vector<double>& b) {
  const auto ra = ranks(a);
  const auto rb = ranks(b);
  const double ma = std::accumulate(ra.begin(), ra.end(), 0.0) / ra.size();
  const double mb = std::accumulate(rb.begin(), rb.end(), 0.0) / rb.size();
  double sab = 0, saa = 0, sbb = 0;
  for (std::size_t i = 0; i < ra.size(); ++i) {
    sab += (ra[i] - ma) * (rb[i] - mb);
    saa += (ra[i] - ma) * (ra[i] - ma);
    sbb += (rb[i] - mb) * (rb[i] - mb);
  }
  return sab / std::sqrt(saa * sbb);
}

/// Hand-built fit: no MCMC, fixed parameter sets.
FittedModels manual_fit(const data::Table& t, std::size_t m, double days_slope) {
  FittedModels fit;
  const auto design = data::encode_design(t);
  fit.levels = design.levels;
  fit.n_coef = design.cols();
  const auto p = static_cast<Eigen::Index>(fit.n_coef);
  for (std::size_t l = 0; l < m; ++l) {
    models::ZitpDraw d;
    d.alpha = Eigen::VectorXd::Constant(p, 0.0);
    d.alpha.head(3).setConstant(4.5);
    d.beta = Eigen::VectorXd::Constant(p, 0.0);
    d.beta.head(3).setConstant(-0.7);
    d.tau = 1.0;
    fit.days_sets.push_back(d);
    models::PriceParams g;
    g.gamma = Eigen::VectorXd::Zero(p + 1);
    g.gamma.head(3).setConstant(4.5);
    g.gamma(p) = days_slope;
    g.sigma = 0.3;
    fit.price_sets.push_back(g);
  }
  return fit;
}

SynthesisConfig quick_config(std::size_t m) {
  SynthesisConfig c;
  c.m = m;
  c.seed = 17;
  c.chain.warmup = 300;
  c.chain.keep = 300;
  c.chain.thin = 3;
  return c;
}

}  // namespace

TEST(ConfigHash, StableHexDigest) {
  SynthesisConfig c;
  const auto h = config_hash(flatten(c));
  EXPECT_EQ(h.size(), 16u);
  EXPECT_EQ(h, config_hash(flatten(c)));
  c.seed = 2;
  EXPECT_NE(h, config_hash(flatten(c)));
  // FNV-1a of the empty string.
  EXPECT_EQ(config_hash({}), "cbf29ce484222325");
}

TEST(SynthesizeFromFit, PriceFollowsSyntheticDays) {
  const auto t = partsyn::testing::surrogate_listings(2000, 21);
  for (double slope : {0.004, -0.004}) {
    const auto fit = manual_fit(t, 2, slope);
    const auto c = synthesize_from_fit(fit, KeyColumns::of(t), 5);
    ASSERT_EQ(c.m(), 2u);
    for (const auto& rep : c.replicates) {
      std::vector<double> d(rep.days.begin(), rep.days.end());
      std::vector<double> lp;
      for (double p : rep.price) lp.push_back(std::log(p));
      const double rho = spearman(d, lp);
      EXPECT_GT(rho * slope, 0.0) << "rho " << rho;
      EXPECT_GT(std::abs(rho), 0.3);
    }
  }
}

TEST(SynthesizeFromFit, SupportKeysAndDeterminism) {
  const auto t = partsyn::testing::surrogate_listings(500, 22);
  const auto fit = manual_fit(t, 4, 0.001);
  const auto a = synthesize_from_fit(fit, KeyColumns::of(t), 9, 1);
  const auto b = synthesize_from_fit(fit, KeyColumns::of(t), 9, 4);
  ASSERT_EQ(a.m(), 4u);
  for (std::size_t l = 0; l < a.m(); ++l) {
    EXPECT_EQ(a.replicates[l].index, l + 1);
    EXPECT_EQ(a.replicates[l].days, b.replicates[l].days);
    EXPECT_EQ(a.replicates[l].price, b.replicates[l].price);
    const auto table = a.replicates[l].to_table();
    EXPECT_NO_THROW(table.validate());
    EXPECT_EQ(table.neighborhood, t.neighborhood);
    EXPECT_EQ(table.room_type, t.room_type);
    EXPECT_EQ(table.reviews, t.reviews);
  }
  EXPECT_NE(a.replicates[0].days, a.replicates[1].days);
  const auto other = synthesize_from_fit(fit, KeyColumns::of(t), 10);
  EXPECT_NE(a.replicates[0].days, other.replicates[0].days);
}

TEST(SynthesizeFromFit, OutputIgnoresConfidentialOutcomes) {
  // Two confidential tables with equal keys but different outcomes give the
  // same synthetic values once the fit is fixed: the draw path only sees keys.
  auto t1 = partsyn::testing::surrogate_listings(300, 23);
  auto t2 = t1;
  for (std::size_t i = 0; i < t2.size(); ++i) {
    t2.days[i] = 365 - t2.days[i];
    t2.price[i] *= 3.0;
  }
  const auto fit = manual_fit(t1, 2, 0.002);
  const auto a = synthesize_from_fit(fit, KeyColumns::of(t1), 4);
  const auto b = synthesize_from_fit(fit, KeyColumns::of(t2), 4);
  EXPECT_EQ(a.replicates[1].days, b.replicates[1].days);
  EXPECT_EQ(a.replicates[1].price, b.replicates[1].price);
}

TEST(SequentialSynthesize, SmallRunEndToEnd) {
  const auto t = partsyn::testing::surrogate_listings(400, 24);
  auto cfg = quick_config(3);
  cfg.force = true;
  const auto a = sequential_synthesize(t, cfg);
  const auto b = sequential_synthesize(t, cfg);
  ASSERT_EQ(a.m(), 3u);
  for (std::size_t l = 0; l < 3; ++l) {
    EXPECT_EQ(a.replicates[l].days, b.replicates[l].days);
    EXPECT_EQ(a.replicates[l].price, b.replicates[l].price);
    for (int d : a.replicates[l].days) ASSERT_TRUE(d >= 0 && d <= 365);
    for (double p : a.replicates[l].price) ASSERT_GT(p, 0.0);
  }
  EXPECT_EQ(a.provenance.seed, 17u);
  EXPECT_EQ(a.provenance.config_hash, config_hash(flatten(cfg)));
  ASSERT_EQ(a.provenance.diagnostics.size(), 2u);
  EXPECT_TRUE(a.provenance.diagnostics[0].max_rhat.has_value());

  ScratchDir dir("collection");
  write_collection(a, dir.path());
  std::size_t files = 0;
  for (const auto& e : std::filesystem::directory_iterator(dir.path())) files += e.is_regular_file();
  EXPECT_EQ(files, 4u);
  EXPECT_TRUE(std::filesystem::exists(dir / "synthetic_1.csv"));
  EXPECT_TRUE(std::filesystem::exists(dir / "synthetic_3.csv"));
  const auto back = read_collection(dir.path());
  ASSERT_EQ(back.m(), 3u);
  for (std::size_t l = 0; l < 3; ++l) {
    EXPECT_EQ(back.replicates[l].days, a.replicates[l].days);
    EXPECT_EQ(back.replicates[l].price, a.replicates[l].price);
    EXPECT_EQ(*back.replicates[l].keys, KeyColumns::of(t));
  }
  EXPECT_EQ(back.provenance.seed, a.provenance.seed);
  EXPECT_EQ(back.provenance.config_hash, a.provenance.config_hash);
  EXPECT_EQ(back.provenance.config, a.provenance.config);

  std::filesystem::remove(dir / "synthetic_2.csv");
  try {
    read_collection(dir.path());
    FAIL() << "expected DataError";
  } catch (const DataError& e) {
    EXPECT_NE(std::string(e.what()).find("synthetic_2.csv"), std::string::npos);
  }
}

TEST(SequentialSynthesize, RefusesWhenRhatExceedsLimit) {
  const auto t = partsyn::testing::surrogate_listings(200, 25);
  auto cfg = quick_config(2);
  cfg.max_rhat = 0.5;  // unattainable
  EXPECT_THROW(sequential_synthesize(t, cfg), ModelFitError);
  cfg.force = true;
  EXPECT_NO_THROW(sequential_synthesize(t, cfg));
}

TEST(SequentialSynthesize, NeedsTwoReplicates) {
  const auto t = partsyn::testing::surrogate_listings(50, 26);
  EXPECT_THROW(sequential_synthesize(t, quick_config(1)), UsageError);
}

TEST(SequentialSynthesize, AllZeroDaysGiveMostlyZeros) {
  auto t = partsyn::testing::surrogate_listings(400, 27);
  std::fill(t.days.begin(), t.days.end(), 0);
  auto cfg = quick_config(5);
  cfg.chain.warmup = 1000;
  cfg.chain.keep = 1000;
  cfg.chain.thin = 5;
  cfg.force = true;
  const auto fit = fit_models(t, cfg);
  const auto c = synthesize_from_fit(fit, KeyColumns::of(t), cfg.seed);
  for (const auto& rep : c.replicates) {
    const auto zeros = std::count(rep.days.begin(), rep.days.end(), 0);
    EXPECT_GT(static_cast<double>(zeros) / static_cast<double>(rep.days.size()), 0.95);
  }
}

TEST(SequentialSynthesize, IndependentChainSelection) {
  const auto t = partsyn::testing::surrogate_listings(150, 28);
  auto cfg = quick_config(3);
  cfg.chain.selection = mcmc::SelectionPolicy::independent_chains;
  cfg.force = true;
  const auto fit = fit_models(t, cfg);
  EXPECT_EQ(fit.days_draws.n_chains(), 3u);
  EXPECT_EQ(fit.days_sets.size(), 3u);
  EXPECT_EQ(fit.price_sets.size(), 3u);
}
