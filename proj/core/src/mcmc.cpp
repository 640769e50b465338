#include "partsyn/mcmc.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <fstream>
#include <limits>
#include <mutex>
#include <numeric>
#include <thread>

#include "partsyn/error.hpp"

namespace partsyn::mcmc {

void Target::sync(std::span<const double>) {}

double Target::delta_log_density(std::span<const double> x, std::size_t j, double value) const {
  std::vector<double> y(x.begin(), x.end());
  y[j] = value;
  return log_density(y) - log_density(x);
}

void Target::accept(std::span<double> x, std::size_t j, double value) { x[j] = value; }

void Target::gibbs_update(std::span<double>, Rng&) {}

std::vector<std::size_t> Target::random_walk_components() const {
  std::vector<std::size_t> all(parameters().size());
  std::iota(all.begin(), all.end(), std::size_t{0});
  return all;
}

std::size_t PosteriorDraws::index_of(const std::string& name) const {
  const auto it = std::find(names.begin(), names.end(), name);
  if (it == names.end()) throw ModelFitError("no parameter named " + name + " in posterior draws");
  return static_cast<std::size_t>(it - names.begin());
}

std::vector<double> PosteriorDraws::pooled(std::size_t parameter) const {
  std::vector<double> out;
  for (const auto& c : chains) {
    const auto col = c.col(static_cast<Eigen::Index>(parameter));
    out.insert(out.end(), col.data(), col.data() + col.size());
  }
  return out;
}

namespace {

struct ChainResult {
  Eigen::MatrixXd draws;
  std::vector<double> log_density;
  std::vector<double> acceptance;
};

double logit(double p) { return std::log(p) - std::log1p(-p); }
double inv_logit(double v) { return 1.0 / (1.0 + std::exp(-v)); }

ChainResult run_one(const Target& prototype, const ChainConfig& config, std::size_t chain_index,
                    const std::vector<ParameterInfo>& info, const std::vector<std::size_t>& tracked) {
  auto target = prototype.clone();
  std::vector<double> x = target->initial_point();
  target->sync(x);
  Rng rng = make_stream(config.seed, chain_index);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> uniform(0.0, 1.0);

  const std::vector<std::size_t> rw = target->random_walk_components();
  std::vector<double> log_scale(rw.size(), std::log(config.adaptation.initial_scale));
  std::vector<std::size_t> batch_accepts(rw.size(), 0);
  std::vector<std::size_t> kept_accepts(rw.size(), 0);
  std::size_t warmup_accepts = 0;
  std::size_t batches = 0;

  const std::size_t retained = config.retained_per_chain();
  ChainResult result;
  result.draws.resize(static_cast<Eigen::Index>(retained), static_cast<Eigen::Index>(tracked.size()));
  result.log_density.reserve(retained);

  const std::size_t total = config.warmup + config.keep;
  std::size_t row = 0;
  for (std::size_t it = 0; it < total; ++it) {
    const bool warming = it < config.warmup;
    for (std::size_t k = 0; k < rw.size(); ++k) {
      const std::size_t j = rw[k];
      const double step = std::exp(log_scale[k]) * normal(rng);
      const double current = x[j];
      double proposal = current;
      double log_jacobian = 0.0;
      switch (info[j].support) {
        case Support::real:
          proposal = current + step;
          break;
        case Support::positive:
          proposal = current * std::exp(step);
          log_jacobian = step;
          break;
        case Support::unit_interval: {
          proposal = inv_logit(logit(current) + step);
          log_jacobian = std::log(proposal) + std::log1p(-proposal) - std::log(current) - std::log1p(-current);
          break;
        }
      }
      const bool in_support = std::isfinite(proposal) &&
                              (info[j].support != Support::positive || proposal > 0.0) &&
                              (info[j].support != Support::unit_interval || (proposal > 0.0 && proposal < 1.0));
      if (!in_support) continue;
      const double log_ratio = target->delta_log_density(x, j, proposal) + log_jacobian;
      if (std::isnan(log_ratio)) continue;
      if (log_ratio >= 0.0 || std::log(uniform(rng)) < log_ratio) {
        target->accept(x, j, proposal);
        if (warming) {
          ++batch_accepts[k];
          ++warmup_accepts;
        } else {
          ++kept_accepts[k];
        }
      }
    }
    target->gibbs_update(x, rng);

    if (warming && (it + 1) % config.adaptation.batch == 0) {
      ++batches;
      const double gain = 3.0 / std::sqrt(static_cast<double>(batches));
      for (std::size_t k = 0; k < rw.size(); ++k) {
        const double rate = static_cast<double>(batch_accepts[k]) / static_cast<double>(config.adaptation.batch);
        log_scale[k] += gain * (rate - config.adaptation.target_acceptance);
        log_scale[k] = std::clamp(log_scale[k], -20.0, 5.0);
        batch_accepts[k] = 0;
      }
    }
    if (!warming && (it - config.warmup + 1) % config.thin == 0 && row < retained) {
      for (std::size_t t = 0; t < tracked.size(); ++t)
        result.draws(static_cast<Eigen::Index>(row), static_cast<Eigen::Index>(t)) = x[tracked[t]];
      result.log_density.push_back(target->log_density(x));
      ++row;
    }
  }
  if (config.warmup > 0 && !rw.empty() && warmup_accepts == 0)
    throw ModelFitError("no random-walk proposal accepted during warmup (chain " + std::to_string(chain_index) +
                        "); step-size adaptation is mis-scaled");

  result.acceptance.assign(tracked.size(), std::numeric_limits<double>::quiet_NaN());
  for (std::size_t k = 0; k < rw.size(); ++k) {
    const auto pos = std::find(tracked.begin(), tracked.end(), rw[k]);
    if (pos == tracked.end() || config.keep == 0) continue;
    result.acceptance[static_cast<std::size_t>(pos - tracked.begin())] =
        static_cast<double>(kept_accepts[k]) / static_cast<double>(config.keep);
  }
  return result;
}

}  // namespace

PosteriorDraws run_chain(const Target& target, const ChainConfig& config) {
  if (config.n_chains == 0) throw ModelFitError("n_chains must be positive");
  if (config.thin == 0) throw ModelFitError("thin must be positive");
  if (config.adaptation.batch == 0) throw ModelFitError("adaptation batch must be positive");

  const auto info = target.parameters();
  std::vector<std::size_t> tracked;
  PosteriorDraws out;
  for (std::size_t j = 0; j < info.size(); ++j) {
    if (!info[j].tracked) continue;
    tracked.push_back(j);
    out.names.push_back(info[j].name);
  }

  const auto init = target.initial_point();
  if (init.size() != info.size()) throw ModelFitError("initial point has wrong dimension");
  const double lp0 = target.log_density(init);
  if (!std::isfinite(lp0)) throw ModelFitError("log density is not finite at the initial point");

  std::vector<ChainResult> results(config.n_chains);
  std::vector<std::exception_ptr> errors(config.n_chains);
  unsigned workers = config.threads ? config.threads : std::max(1u, std::thread::hardware_concurrency());
  workers = std::min<unsigned>(workers, static_cast<unsigned>(config.n_chains));

  std::atomic<std::size_t> next{0};
  auto work = [&] {
    for (std::size_t c = next++; c < config.n_chains; c = next++) {
      try {
        results[c] = run_one(target, config, c, info, tracked);
      } catch (...) {
        errors[c] = std::current_exception();
      }
    }
  };
  if (workers <= 1) {
    work();
  } else {
    std::vector<std::thread> pool;
    for (unsigned w = 0; w < workers; ++w) pool.emplace_back(work);
    for (auto& t : pool) t.join();
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);

  for (auto& r : results) {
    out.chains.push_back(std::move(r.draws));
    out.log_density.push_back(std::move(r.log_density));
    out.acceptance.push_back(std::move(r.acceptance));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Diagnostics

namespace {

double mean_of(std::span<const double> v) {
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

double var_of(std::span<const double> v, double mean) {
  double s = 0.0;
  for (double x : v) s += (x - mean) * (x - mean);
  return s / static_cast<double>(v.size() - 1);
}

std::optional<double> split_rhat(const std::vector<std::span<const double>>& chains) {
  std::vector<std::span<const double>> halves;
  for (auto c : chains) {
    const std::size_t h = c.size() / 2;
    halves.push_back(c.subspan(0, h));
    halves.push_back(c.subspan(c.size() - h, h));
  }
  const double n = static_cast<double>(halves[0].size());
  const double m = static_cast<double>(halves.size());
  std::vector<double> means;
  double w = 0.0;
  for (auto h : halves) {
    const double mu = mean_of(h);
    means.push_back(mu);
    w += var_of(h, mu);
  }
  w /= m;
  const double grand = mean_of(means);
  double b = 0.0;
  for (double mu : means) b += (mu - grand) * (mu - grand);
  b *= n / (m - 1.0);
  if (!(w > 0.0)) return std::nullopt;
  const double var_plus = (n - 1.0) / n * w + b / n;
  return std::sqrt(var_plus / w);
}

std::optional<double> effective_sample_size(const std::vector<std::span<const double>>& chains) {
  const std::size_t m = chains.size();
  const std::size_t n = chains[0].size();
  std::vector<double> means(m), vars(m);
  for (std::size_t c = 0; c < m; ++c) {
    means[c] = mean_of(chains[c]);
    vars[c] = var_of(chains[c], means[c]);
  }
  const double w = mean_of(vars);
  const double grand = mean_of(means);
  double b = 0.0;
  for (double mu : means) b += (mu - grand) * (mu - grand);
  b *= static_cast<double>(n) / static_cast<double>(m - 1);
  const double var_plus = (static_cast<double>(n) - 1.0) / static_cast<double>(n) * w + b / static_cast<double>(n);
  if (!(w > 0.0) || !(var_plus > 0.0)) return std::nullopt;

  // rho_t = 1 - (W - mean_c autocov_c(t)) / var_plus, summed with Geyer's
  // initial monotone positive-pair rule.
  auto rho = [&](std::size_t lag) {
    double acov = 0.0;
    for (std::size_t c = 0; c < m; ++c) {
      double s = 0.0;
      for (std::size_t i = 0; i + lag < n; ++i) s += (chains[c][i] - means[c]) * (chains[c][i + lag] - means[c]);
      acov += s / static_cast<double>(n);
    }
    acov /= static_cast<double>(m);
    return 1.0 - (w - acov) / var_plus;
  };
  double tau = -1.0;
  double prev_pair = std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; 2 * k + 1 < n; ++k) {
    double pair = (k == 0 ? 1.0 : rho(2 * k)) + rho(2 * k + 1);
    if (pair <= 0.0) break;
    pair = std::min(pair, prev_pair);
    prev_pair = pair;
    tau += 2.0 * pair;
  }
  tau = std::max(tau, 1.0 / std::log10(static_cast<double>(m * n)));
  return static_cast<double>(m * n) / tau;
}

}  // namespace

DiagnosticsReport diagnostics(const PosteriorDraws& draws) {
  if (draws.n_chains() < 2) throw ModelFitError("diagnostics require at least 2 chains");
  const std::size_t n = draws.draws_per_chain();
  if (n < 50) throw ModelFitError("diagnostics require at least 50 retained draws per chain");
  for (const auto& c : draws.chains)
    if (static_cast<std::size_t>(c.rows()) != n) throw ModelFitError("chains have unequal lengths");

  DiagnosticsReport report;
  double acc_sum = 0.0;
  std::size_t acc_n = 0;
  for (const auto& per_chain : draws.acceptance)
    for (double a : per_chain)
      if (!std::isnan(a)) {
        acc_sum += a;
        ++acc_n;
      }
  report.mean_acceptance = acc_n ? acc_sum / static_cast<double>(acc_n) : std::numeric_limits<double>::quiet_NaN();

  for (std::size_t p = 0; p < draws.names.size(); ++p) {
    std::vector<std::span<const double>> chains;
    for (const auto& c : draws.chains)
      chains.emplace_back(c.col(static_cast<Eigen::Index>(p)).data(), n);
    ParameterDiagnostics d;
    d.name = draws.names[p];
    d.rhat = split_rhat(chains);
    d.ess = effective_sample_size(chains);
    const auto all = draws.pooled(p);
    d.mean = mean_of(all);
    d.sd = std::sqrt(var_of(all, d.mean));
    if (d.rhat) report.max_rhat = std::max(report.max_rhat, *d.rhat);
    report.parameters.push_back(std::move(d));
  }
  return report;
}

std::vector<ParameterSet> select_parameter_sets(const PosteriorDraws& draws, std::size_t m, std::size_t min_gap) {
  std::size_t total = 0;
  for (const auto& c : draws.chains) total += static_cast<std::size_t>(c.rows());
  if (m == 0) throw ModelFitError("m must be positive");
  if (m > total)
    throw ModelFitError("cannot select " + std::to_string(m) + " parameter sets from " + std::to_string(total) +
                        " retained draws");
  const std::size_t gap = total / m;
  if (gap < min_gap)
    throw ModelFitError("spacing " + std::to_string(gap) + " between parameter sets is below the minimum gap " +
                        std::to_string(min_gap));

  std::vector<ParameterSet> out;
  out.reserve(m);
  for (std::size_t k = 1; k <= m; ++k) {
    std::size_t pos = k * gap - 1;  // 0-based position in the concatenated chains
    std::size_t chain = 0;
    while (pos >= static_cast<std::size_t>(draws.chains[chain].rows())) {
      pos -= static_cast<std::size_t>(draws.chains[chain].rows());
      ++chain;
    }
    ParameterSet s;
    s.chain = chain;
    s.iteration = pos + 1;
    const auto r = draws.chains[chain].row(static_cast<Eigen::Index>(pos));
    for (Eigen::Index c = 0; c < r.size(); ++c) s.values.push_back(r(c));
    out.push_back(std::move(s));
  }
  return out;
}

std::vector<ParameterSet> last_draw_per_chain(const PosteriorDraws& draws) {
  std::vector<ParameterSet> out;
  for (std::size_t c = 0; c < draws.chains.size(); ++c) {
    const auto& mat = draws.chains[c];
    if (mat.rows() == 0) throw ModelFitError("chain " + std::to_string(c) + " has no retained draws");
    ParameterSet s;
    s.chain = c;
    s.iteration = static_cast<std::size_t>(mat.rows());
    for (Eigen::Index j = 0; j < mat.cols(); ++j) s.values.push_back(mat(mat.rows() - 1, j));
    out.push_back(std::move(s));
  }
  return out;
}

void write_draws_csv(const PosteriorDraws& draws, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path.string());
  out.precision(17);
  out << "chain,iteration,parameter,value\n";
  for (std::size_t c = 0; c < draws.chains.size(); ++c)
    for (Eigen::Index i = 0; i < draws.chains[c].rows(); ++i)
      for (std::size_t p = 0; p < draws.names.size(); ++p)
        out << c + 1 << ',' << i + 1 << ',' << draws.names[p] << ','
            << draws.chains[c](i, static_cast<Eigen::Index>(p)) << '\n';
}

}  // namespace partsyn::mcmc
