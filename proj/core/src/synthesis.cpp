#include "partsyn/synthesis.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "partsyn/error.hpp"
#include "partsyn/parallel.hpp"

namespace partsyn::synthesis {
namespace {

using nlohmann::json;

constexpr std::uint64_t kDaysChainStream = 1;
constexpr std::uint64_t kPriceChainStream = 2;
constexpr std::uint64_t kReplicateStream = 3;

data::Table keys_only(const KeyColumns& keys) {
  data::Table t;
  t.neighborhood = keys.neighborhood;
  t.room_type = keys.room_type;
  t.reviews = keys.reviews;
  t.days.assign(keys.size(), 0);
  t.price.assign(keys.size(), 1.0);
  return t;
}

bool is_coefficient(const std::string& name) {
  return name.starts_with("alpha[") || name.starts_with("beta[") || name.starts_with("gamma[");
}

ModelSummary summarize(const std::string& model, const mcmc::PosteriorDraws& draws,
                       const std::optional<mcmc::DiagnosticsReport>& report) {
  ModelSummary s;
  s.model = model;
  double acc = 0.0;
  std::size_t count = 0;
  for (const auto& chain : draws.acceptance)
    for (double a : chain)
      if (a == a) {
        acc += a;
        ++count;
      }
  if (count) s.mean_acceptance = acc / static_cast<double>(count);
  if (!report) return s;
  for (const auto& p : report->parameters) {
    if (p.rhat && is_coefficient(p.name)) s.max_rhat = std::max(s.max_rhat.value_or(0.0), *p.rhat);
    if (p.ess) s.min_ess = std::min(s.min_ess.value_or(*p.ess), *p.ess);
  }
  return s;
}

std::optional<mcmc::DiagnosticsReport> try_diagnostics(const mcmc::PosteriorDraws& draws) {
  if (draws.n_chains() < 2 || draws.draws_per_chain() < 50) return std::nullopt;
  return mcmc::diagnostics(draws);
}

void check_convergence(const std::string& model, const std::optional<mcmc::DiagnosticsReport>& report,
                       double max_rhat) {
  if (!report) return;
  for (const auto& p : report->parameters) {
    if (!is_coefficient(p.name) || !p.rhat || *p.rhat <= max_rhat) continue;
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.3f", *p.rhat);
    throw ModelFitError(model + " model did not converge: R-hat of " + p.name + " is " + buf + " (limit " +
                        std::to_string(max_rhat) + "); rerun with a larger budget or --force");
  }
}

std::vector<mcmc::ParameterSet> pick(const mcmc::PosteriorDraws& draws, const SynthesisConfig& config) {
  if (config.chain.selection == mcmc::SelectionPolicy::independent_chains) {
    auto sets = mcmc::last_draw_per_chain(draws);
    if (sets.size() < config.m) throw ModelFitError("independent-chain selection needs one chain per replicate");
    sets.resize(config.m);
    return sets;
  }
  return mcmc::select_parameter_sets(draws, config.m, config.chain.min_gap);
}

json summary_json(const ModelSummary& s) {
  json j;
  j["model"] = s.model;
  j["max_rhat"] = s.max_rhat ? json(*s.max_rhat) : json(nullptr);
  j["min_ess"] = s.min_ess ? json(*s.min_ess) : json(nullptr);
  j["mean_acceptance"] = s.mean_acceptance ? json(*s.mean_acceptance) : json(nullptr);
  return j;
}

std::filesystem::path replicate_path(const std::filesystem::path& dir, std::size_t l) {
  return dir / ("synthetic_" + std::to_string(l) + ".csv");
}

}  // namespace

KeyColumns KeyColumns::of(const data::Table& table) {
  return {table.neighborhood, table.room_type, table.reviews};
}

data::Table SyntheticReplicate::to_table() const {
  data::Table t;
  if (!keys) throw std::logic_error("replicate has no key columns");
  t.neighborhood = keys->neighborhood;
  t.room_type = keys->room_type;
  t.reviews = keys->reviews;
  t.days = days;
  t.price = price;
  return t;
}

std::vector<data::Table> SyntheticCollection::tables() const {
  std::vector<data::Table> out;
  out.reserve(replicates.size());
  for (const auto& r : replicates) out.push_back(r.to_table());
  return out;
}

std::map<std::string, std::string> flatten(const SynthesisConfig& c) {
  auto num = [](double v) {
    std::ostringstream os;
    os.precision(17);
    os << v;
    return os.str();
  };
  return {
      {"m", std::to_string(c.m)},
      {"seed", std::to_string(c.seed)},
      {"mcmc.chains", std::to_string(c.chain.n_chains)},
      {"mcmc.warmup", std::to_string(c.chain.warmup)},
      {"mcmc.keep", std::to_string(c.chain.keep)},
      {"mcmc.thin", std::to_string(c.chain.thin)},
      {"mcmc.selection",
       c.chain.selection == mcmc::SelectionPolicy::spaced ? std::string("spaced") : std::string("independent")},
      {"mcmc.min_gap", std::to_string(c.chain.min_gap)},
      {"model.tau_is_sd", c.zitp.tau_is_sd ? "true" : "false"},
      {"model.max_rhat", num(c.max_rhat)},
      {"model.zitp_coef_sd", num(c.zitp.coef_prior_sd)},
      {"model.price_coef_sd", num(c.price.coef_prior_sd)},
  };
}

std::string config_hash(const std::map<std::string, std::string>& flat) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  auto feed = [&h](const std::string& s) {
    for (unsigned char ch : s) {
      h ^= ch;
      h *= 0x100000001b3ULL;
    }
  };
  for (const auto& [k, v] : flat) feed(k + "=" + v + "\n");
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

FittedModels fit_models(const data::Table& table, const SynthesisConfig& config) {
  table.validate();
  if (config.m < 1) throw ModelFitError("m must be positive");

  FittedModels fit;
  fit.zitp = config.zitp;
  const auto design = data::encode_design(table);
  fit.levels = design.levels;
  fit.n_coef = design.cols();

  auto chain = config.chain;
  chain.threads = config.threads;
  if (chain.selection == mcmc::SelectionPolicy::independent_chains) chain.n_chains = std::max(chain.n_chains, config.m);

  chain.seed = mix_seed(config.seed, kDaysChainStream);
  const models::ZitpTarget days_target(design, table.days, config.zitp);
  fit.days_draws = mcmc::run_chain(days_target, chain);

  chain.seed = mix_seed(config.seed, kPriceChainStream);
  const models::PriceTarget price_target(design, table.days, table.price, config.price);
  fit.price_draws = mcmc::run_chain(price_target, chain);

  fit.days_diagnostics = try_diagnostics(fit.days_draws);
  fit.price_diagnostics = try_diagnostics(fit.price_draws);
  if (!config.force) {
    check_convergence("AvailableDays", fit.days_diagnostics, config.max_rhat);
    check_convergence("Price", fit.price_diagnostics, config.max_rhat);
  }

  for (const auto& s : pick(fit.days_draws, config)) fit.days_sets.push_back(models::zitp_draw_from(s.values, fit.n_coef));
  for (const auto& s : pick(fit.price_draws, config))
    fit.price_sets.push_back(models::price_draw_from(s.values, fit.n_coef + 1));
  return fit;
}

SyntheticCollection synthesize_from_fit(const FittedModels& fit, const KeyColumns& keys, std::uint64_t seed,
                                        unsigned threads) {
  if (fit.days_sets.size() != fit.price_sets.size()) throw std::invalid_argument("unpaired parameter sets");
  const std::size_t m = fit.days_sets.size();
  const auto design = data::encode_design(keys_only(keys), fit.levels);
  auto shared_keys = std::make_shared<const KeyColumns>(keys);

  SyntheticCollection out;
  out.replicates.resize(m);
  const std::uint64_t base = mix_seed(seed, kReplicateStream);
  parallel_for(m, threads, [&](std::size_t l) {
    Rng rng = make_stream(base, l + 1);
    auto& rep = out.replicates[l];
    rep.index = l + 1;
    rep.keys = shared_keys;
    rep.days.resize(design.rows());
    rep.price.resize(design.rows());
    // Days for every record first, then prices fed by the synthetic days.
    for (std::size_t i = 0; i < design.rows(); ++i)
      rep.days[i] = models::draw_synthetic_days(fit.days_sets[l], design.row(i), rng, fit.zitp);
    for (std::size_t i = 0; i < design.rows(); ++i)
      rep.price[i] = models::draw_synthetic_logprice(fit.price_sets[l], design.row(i), rep.days[i], rng);
  });

  out.provenance.seed = seed;
  out.provenance.m = m;
  out.provenance.method = "bayes";
  out.provenance.diagnostics = {summarize("AvailableDays", fit.days_draws, fit.days_diagnostics),
                                summarize("Price", fit.price_draws, fit.price_diagnostics)};
  return out;
}

SyntheticCollection sequential_synthesize(const data::Table& table, const SynthesisConfig& config) {
  if (config.m < 2) throw UsageError("m must be at least 2 for the combining rules");
  const auto fit = fit_models(table, config);
  auto out = synthesize_from_fit(fit, KeyColumns::of(table), config.seed, config.threads);
  out.provenance.config = flatten(config);
  out.provenance.config_hash = config_hash(out.provenance.config);
  return out;
}

std::string provenance_json(const Provenance& p) {
  json j;
  j["schema_version"] = 1;
  j["seed"] = p.seed;
  j["method"] = p.method;
  j["m"] = p.m;
  j["config_hash"] = p.config_hash;
  j["config"] = p.config;
  j["diagnostics"] = json::array();
  for (const auto& d : p.diagnostics) j["diagnostics"].push_back(summary_json(d));
  return j.dump(2) + "\n";
}

void write_collection(const SyntheticCollection& collection, const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw DataError("cannot create " + dir.string() + ": " + ec.message());
  for (const auto& rep : collection.replicates) data::write_csv(rep.to_table(), replicate_path(dir, rep.index));
  std::ofstream out(dir / "provenance.json");
  if (!out) throw DataError("cannot write " + (dir / "provenance.json").string());
  out << provenance_json(collection.provenance);
}

SyntheticCollection read_collection(const std::filesystem::path& dir) {
  const auto prov_path = dir / "provenance.json";
  std::ifstream in(prov_path);
  if (!in) throw DataError("missing " + prov_path.string());
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw DataError("malformed " + prov_path.string() + ": " + e.what());
  }

  SyntheticCollection out;
  auto& p = out.provenance;
  try {
    p.seed = j.at("seed").get<std::uint64_t>();
    p.method = j.at("method").get<std::string>();
    p.m = j.at("m").get<std::size_t>();
    p.config_hash = j.value("config_hash", std::string());
    p.config = j.value("config", std::map<std::string, std::string>());
    for (const auto& d : j.value("diagnostics", json::array())) {
      ModelSummary s;
      s.model = d.value("model", std::string());
      if (d.contains("max_rhat") && !d["max_rhat"].is_null()) s.max_rhat = d["max_rhat"].get<double>();
      if (d.contains("min_ess") && !d["min_ess"].is_null()) s.min_ess = d["min_ess"].get<double>();
      if (d.contains("mean_acceptance") && !d["mean_acceptance"].is_null())
        s.mean_acceptance = d["mean_acceptance"].get<double>();
      p.diagnostics.push_back(s);
    }
  } catch (const json::exception& e) {
    throw DataError("malformed " + prov_path.string() + ": " + e.what());
  }

  std::shared_ptr<const KeyColumns> keys;
  for (std::size_t l = 1; l <= p.m; ++l) {
    const auto path = replicate_path(dir, l);
    if (!std::filesystem::exists(path)) throw DataError("missing replicate file " + path.string());
    auto loaded = data::load_csv(path, data::canonical_schema());
    if (loaded.rejected)
      throw DataError(path.string() + ": " + std::to_string(loaded.rejected) + " invalid rows");
    auto rep_keys = KeyColumns::of(loaded.table);
    if (!keys) {
      keys = std::make_shared<const KeyColumns>(std::move(rep_keys));
    } else if (!(*keys == rep_keys)) {
      throw DataError(path.string() + ": key columns differ from synthetic_1.csv");
    }
    SyntheticReplicate rep;
    rep.index = l;
    rep.days = std::move(loaded.table.days);
    rep.price = std::move(loaded.table.price);
    rep.keys = keys;
    out.replicates.push_back(std::move(rep));
  }
  return out;
}

}  // namespace partsyn::synthesis
