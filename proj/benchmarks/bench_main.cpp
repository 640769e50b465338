#include <benchmark/benchmark.h>

#include "partsyn/cart.hpp"
#include "partsyn/mcmc.hpp"
#include "partsyn/models.hpp"
#include "partsyn/risk.hpp"
#include "partsyn/trunc_poisson.hpp"
#include "partsyn/utility.hpp"
#include "surrogate.hpp"

using namespace partsyn;

static void BM_TruncPoissonNormalizer(benchmark::State& state) {
  const double rate = static_cast<double>(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(models::log_trunc_poisson_normalizer(rate, 365));
}
BENCHMARK(BM_TruncPoissonNormalizer)->Arg(1)->Arg(50)->Arg(300)->Arg(2000);

static void BM_TruncPoissonSample(benchmark::State& state) {
  const models::TruncPoissonSpec spec{static_cast<double>(state.range(0)), 365};
  auto rng = make_stream(1, 0);
  for (auto _ : state) benchmark::DoNotOptimize(models::sample_trunc_poisson(spec, rng));
}
BENCHMARK(BM_TruncPoissonSample)->Arg(1)->Arg(50)->Arg(300);

static void BM_IdentificationRisk(benchmark::State& state) {
  const auto conf = partsyn::testing::surrogate_listings(static_cast<std::size_t>(state.range(0)), 1);
  const auto syn = partsyn::testing::surrogate_listings(static_cast<std::size_t>(state.range(0)), 2);
  auto comparison = conf;
  comparison.days = syn.days;
  comparison.price = syn.price;
  for (auto _ : state) benchmark::DoNotOptimize(risk::identification_risk(conf, comparison, {}));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_IdentificationRisk)->Arg(1000)->Arg(10000)->Unit(benchmark::kMillisecond);

static void BM_Upgma(benchmark::State& state) {
  const auto n = state.range(0);
  data::RowMatrix x(n, 4);
  auto rng = make_stream(3, 0);
  std::normal_distribution<double> normal;
  for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = normal(rng);
  for (auto _ : state) benchmark::DoNotOptimize(utility::upgma(x));
}
BENCHMARK(BM_Upgma)->Arg(500)->Arg(2000)->Unit(benchmark::kMillisecond);

static void BM_ZitpSweep(benchmark::State& state) {
  const auto t = partsyn::testing::surrogate_listings(static_cast<std::size_t>(state.range(0)), 4);
  const models::ZitpTarget target(data::encode_design(t), t.days);
  mcmc::ChainConfig cfg;
  cfg.n_chains = 1;
  cfg.warmup = 0;
  cfg.keep = 100;
  cfg.thin = 1;
  for (auto _ : state) benchmark::DoNotOptimize(mcmc::run_chain(target, cfg));
  state.SetItemsProcessed(state.iterations() * 100);
}
BENCHMARK(BM_ZitpSweep)->Arg(2000)->Arg(10000)->Unit(benchmark::kMillisecond);

static void BM_CartFit(benchmark::State& state) {
  const auto t = partsyn::testing::surrogate_listings(static_cast<std::size_t>(state.range(0)), 5);
  for (auto _ : state) benchmark::DoNotOptimize(cart::fit_cart(t));
}
BENCHMARK(BM_CartFit)->Arg(10000)->Unit(benchmark::kMillisecond);
BENCHMARK_MAIN();
