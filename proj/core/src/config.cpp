#include "partsyn/config.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include "partsyn/error.hpp"

namespace partsyn::config {
namespace {

std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split(std::string_view s, char sep) {
  std::vector<std::string> out;
  std::size_t start = 0;
  for (;;) {
    const auto pos = s.find(sep, start);
    const auto piece = trim(s.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start));
    if (!piece.empty()) out.emplace_back(piece);
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

template <class T>
T parse_unsigned(const std::string& key, const std::string& v) {
  unsigned long long x = 0;
  const auto res = std::from_chars(v.data(), v.data() + v.size(), x);
  if (res.ec != std::errc() || res.ptr != v.data() + v.size())
    throw UsageError(key + ": expected a non-negative integer, got '" + v + "'");
  return static_cast<T>(x);
}

double parse_double(const std::string& key, const std::string& v) {
  double x = 0.0;
  const auto res = std::from_chars(v.data(), v.data() + v.size(), x);
  if (res.ec != std::errc() || res.ptr != v.data() + v.size() || !std::isfinite(x))
    throw UsageError(key + ": expected a number, got '" + v + "'");
  return x;
}

bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw UsageError(key + ": expected true or false, got '" + v + "'");
}

risk::MatchRadii parse_radius(const std::string& key, const std::string& v) {
  const auto parts = split(v, ':');
  if (parts.size() != 2) throw UsageError(key + ": expected r_avail:r_price, got '" + v + "'");
  risk::MatchRadii r;
  r.r_avail = parse_double(key, parts[0]);
  r.r_price = parse_double(key, parts[1]);
  if (r.r_avail < 0.0 || r.r_price < 0.0) throw UsageError(key + ": radii must be non-negative");
  return r;
}

std::string num(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

std::string radius_text(const risk::MatchRadii& r) { return num(r.r_avail) + ":" + num(r.r_price); }

std::filesystem::path resolve_path(const std::string& v, const std::filesystem::path& base) {
  std::filesystem::path p(v);
  if (p.is_relative() && !base.empty()) p = base / p;
  return p.lexically_normal();
}

const std::vector<std::string> kColumnNames = {std::string(data::kNeighborhood), std::string(data::kRoomType),
                                               std::string(data::kReviewsCount), std::string(data::kAvailableDays),
                                               std::string(data::kPrice)};

}  // namespace

synthesis::SynthesisConfig RunConfig::synthesis_config() const {
  synthesis::SynthesisConfig s;
  s.m = m;
  s.seed = seed;
  s.chain = chain;
  s.zitp = zitp;
  s.price = price;
  s.max_rhat = max_rhat;
  s.force = force;
  s.threads = threads;
  return s;
}

const std::map<std::string, std::string>& documented_keys() {
  static const std::map<std::string, std::string> keys = {
      {"input", "confidential CSV (required by every subcommand)"},
      {"column.<Name>", "source column for Neighborhood, RoomType, ReviewsCount, AvailableDays or Price"},
      {"sample_n", "records sampled from the input; 0 keeps all (default 10000)"},
      {"seed", "master seed (default 1)"},
      {"m", "number of synthetic replicates (default 20)"},
      {"method", "bayes or cart (default bayes)"},
      {"out", "output directory (default partsyn_out)"},
      {"threads", "worker cap; 0 uses all cores (default 0)"},
      {"force", "synthesize even when R-hat exceeds model.max_rhat (default false)"},
      {"collection", "replicate directory for utility and risk (default: out)"},
      {"bayes_collection", "Bayesian replicate directory for compare (default: out/bayes)"},
      {"cart_collection", "CART replicate directory for compare (default: out/cart)"},
      {"mcmc.chains", "chains per model (default 2)"},
      {"mcmc.warmup", "warmup iterations per chain (default 5000)"},
      {"mcmc.keep", "post-warmup iterations per chain (default 5000)"},
      {"mcmc.thin", "keep every k-th iteration (default 5)"},
      {"mcmc.selection", "spaced or independent (default spaced)"},
      {"mcmc.min_gap", "minimum spacing of selected draws (default 1)"},
      {"model.tau_is_sd", "treat tau as the error sd rather than its precision (default false)"},
      {"model.max_rhat", "largest tolerated R-hat on coefficients (default 1.2)"},
      {"cart.min_leaf", "minimum leaf size (default 5)"},
      {"cart.complexity", "minimum relative SSE reduction per split (default 1e-8)"},
      {"cart.max_depth", "maximum tree depth (default 30)"},
      {"utility.clusters", "clusters G for the cluster measure (default 10)"},
      {"utility.subsample", "rows per side clustered (default 2000)"},
      {"utility.bootstrap", "bootstrap resamples for quantiles (default 1000)"},
      {"utility.estimands", "comma list such as mean:AvailableDays,q0.9:Price (default mean, q0.25, q0.9 of both)"},
      {"utility.regression_response", "price or log_price (default price)"},
      {"risk.radii", "attribute radius pairs r_avail:r_price (default 5:0.05,10:0.05,10:0.1)"},
      {"risk.id_radius", "identification radius pair (default 5:0.05)"},
      {"risk.id_log_price", "identification price band on the log scale (default true)"},
      {"risk.s_grid", "intruder noise levels S (default 0,0.01,...,0.15)"},
      {"risk.noise_law", "count_scaled or constant (default count_scaled)"},
  };
  return keys;
}

Settings parse_settings(std::string_view text) {
  Settings out;
  std::size_t line_no = 0;
  std::size_t start = 0;
  while (start <= text.size()) {
    const auto end = text.find('\n', start);
    std::string_view line = text.substr(start, end == std::string_view::npos ? std::string_view::npos : end - start);
    ++line_no;
    start = end == std::string_view::npos ? text.size() + 1 : end + 1;
    if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos)
      throw UsageError("config line " + std::to_string(line_no) + ": expected key = value");
    const std::string key(trim(line.substr(0, eq)));
    const std::string value(trim(line.substr(eq + 1)));
    if (key.empty()) throw UsageError("config line " + std::to_string(line_no) + ": empty key");
    if (!out.emplace(key, value).second)
      throw UsageError("config line " + std::to_string(line_no) + ": repeated key '" + key + "'");
  }
  return out;
}

Settings read_settings_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw UsageError("cannot read config file " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_settings(ss.str());
}

void apply(RunConfig& c, const Settings& settings, const std::filesystem::path& base_dir) {
  for (const auto& [key, v] : settings) {
    if (key == "input") {
      c.input = resolve_path(v, base_dir);
    } else if (key.starts_with("column.")) {
      const std::string name = key.substr(7);
      if (std::find(kColumnNames.begin(), kColumnNames.end(), name) == kColumnNames.end())
        throw UsageError(key + ": unknown column '" + name + "'");
      c.columns[name] = v;
    } else if (key == "sample_n") {
      c.sample_n = parse_unsigned<std::size_t>(key, v);
    } else if (key == "seed") {
      c.seed = parse_unsigned<std::uint64_t>(key, v);
    } else if (key == "m") {
      c.m = parse_unsigned<std::size_t>(key, v);
      if (c.m < 2) throw UsageError("m must be at least 2");
    } else if (key == "method") {
      if (v != "bayes" && v != "cart") throw UsageError("method must be bayes or cart, got '" + v + "'");
      c.method = v;
    } else if (key == "out") {
      c.out = resolve_path(v, base_dir);
    } else if (key == "threads") {
      c.threads = parse_unsigned<unsigned>(key, v);
    } else if (key == "force") {
      c.force = parse_bool(key, v);
    } else if (key == "collection") {
      c.collection = resolve_path(v, base_dir);
    } else if (key == "bayes_collection") {
      c.bayes_collection = resolve_path(v, base_dir);
    } else if (key == "cart_collection") {
      c.cart_collection = resolve_path(v, base_dir);
    } else if (key == "mcmc.chains") {
      c.chain.n_chains = parse_unsigned<std::size_t>(key, v);
      if (c.chain.n_chains == 0) throw UsageError("mcmc.chains must be positive");
    } else if (key == "mcmc.warmup") {
      c.chain.warmup = parse_unsigned<std::size_t>(key, v);
    } else if (key == "mcmc.keep") {
      c.chain.keep = parse_unsigned<std::size_t>(key, v);
    } else if (key == "mcmc.thin") {
      c.chain.thin = parse_unsigned<std::size_t>(key, v);
      if (c.chain.thin == 0) throw UsageError("mcmc.thin must be positive");
    } else if (key == "mcmc.selection") {
      if (v == "spaced")
        c.chain.selection = mcmc::SelectionPolicy::spaced;
      else if (v == "independent")
        c.chain.selection = mcmc::SelectionPolicy::independent_chains;
      else
        throw UsageError("mcmc.selection must be spaced or independent, got '" + v + "'");
    } else if (key == "mcmc.min_gap") {
      c.chain.min_gap = parse_unsigned<std::size_t>(key, v);
    } else if (key == "model.tau_is_sd") {
      c.zitp.tau_is_sd = parse_bool(key, v);
    } else if (key == "model.max_rhat") {
      c.max_rhat = parse_double(key, v);
    } else if (key == "cart.min_leaf") {
      c.cart.min_leaf = parse_unsigned<std::size_t>(key, v);
      if (c.cart.min_leaf == 0) throw UsageError("cart.min_leaf must be positive");
    } else if (key == "cart.complexity") {
      c.cart.complexity = parse_double(key, v);
    } else if (key == "cart.max_depth") {
      c.cart.max_depth = parse_unsigned<std::size_t>(key, v);
    } else if (key == "utility.clusters") {
      c.utility.clusters = parse_unsigned<std::size_t>(key, v);
      if (c.utility.clusters == 0) throw UsageError("utility.clusters must be positive");
    } else if (key == "utility.subsample") {
      c.utility.subsample = parse_unsigned<std::size_t>(key, v);
      if (c.utility.subsample == 0) throw UsageError("utility.subsample must be positive");
    } else if (key == "utility.bootstrap") {
      c.utility.bootstrap = parse_unsigned<std::size_t>(key, v);
      if (c.utility.bootstrap < 200) throw UsageError("utility.bootstrap must be at least 200");
    } else if (key == "utility.estimands") {
      c.utility.estimands.clear();
      for (const auto& e : split(v, ',')) c.utility.estimands.push_back(utility::Estimand::parse(e));
    } else if (key == "utility.regression_response") {
      if (v != "price" && v != "log_price")
        throw UsageError("utility.regression_response must be price or log_price, got '" + v + "'");
      c.utility.log_price_response = v == "log_price";
    } else if (key == "risk.radii") {
      c.risk.attribute_radii.clear();
      for (const auto& r : split(v, ',')) c.risk.attribute_radii.push_back(parse_radius(key, r));
      if (c.risk.attribute_radii.empty()) throw UsageError("risk.radii is empty");
    } else if (key == "risk.id_radius") {
      const bool log_scale = c.risk.identification_radii.log_price_for_id;
      c.risk.identification_radii = parse_radius(key, v);
      c.risk.identification_radii.log_price_for_id = log_scale;
    } else if (key == "risk.id_log_price") {
      c.risk.identification_radii.log_price_for_id = parse_bool(key, v);
    } else if (key == "risk.s_grid") {
      c.risk.s_grid.clear();
      for (const auto& s : split(v, ',')) {
        const double x = parse_double(key, s);
        if (x < 0.0) throw UsageError("risk.s_grid values must be non-negative");
        c.risk.s_grid.push_back(x);
      }
      if (c.risk.s_grid.empty()) throw UsageError("risk.s_grid is empty");
    } else if (key == "risk.noise_law") {
      if (v == "count_scaled")
        c.risk.law = risk::NoisePolicy::Law::count_scaled;
      else if (v == "constant")
        c.risk.law = risk::NoisePolicy::Law::constant;
      else
        throw UsageError("risk.noise_law must be count_scaled or constant, got '" + v + "'");
    } else {
      throw UsageError("unknown config key '" + key + "'");
    }
  }
  c.utility.seed = c.seed;
  c.utility.threads = c.threads;
  c.risk.seed = c.seed;
  c.risk.threads = c.threads;
  c.chain.threads = c.threads;
}

RunConfig resolve(const std::optional<std::filesystem::path>& file, const Settings& flags) {
  RunConfig c;
  if (file) apply(c, read_settings_file(*file), file->parent_path());
  apply(c, flags, std::filesystem::current_path());
  return c;
}

Settings snapshot(const RunConfig& c) {
  Settings s;
  s["input"] = c.input.string();
  for (const auto& [k, v] : c.columns) s["column." + k] = v;
  s["sample_n"] = std::to_string(c.sample_n);
  s["seed"] = std::to_string(c.seed);
  s["m"] = std::to_string(c.m);
  s["method"] = c.method;
  s["mcmc.chains"] = std::to_string(c.chain.n_chains);
  s["mcmc.warmup"] = std::to_string(c.chain.warmup);
  s["mcmc.keep"] = std::to_string(c.chain.keep);
  s["mcmc.thin"] = std::to_string(c.chain.thin);
  s["mcmc.selection"] = c.chain.selection == mcmc::SelectionPolicy::spaced ? "spaced" : "independent";
  s["mcmc.min_gap"] = std::to_string(c.chain.min_gap);
  s["model.tau_is_sd"] = c.zitp.tau_is_sd ? "true" : "false";
  s["model.max_rhat"] = num(c.max_rhat);
  s["cart.min_leaf"] = std::to_string(c.cart.min_leaf);
  s["cart.complexity"] = num(c.cart.complexity);
  s["cart.max_depth"] = std::to_string(c.cart.max_depth);
  s["utility.clusters"] = std::to_string(c.utility.clusters);
  s["utility.subsample"] = std::to_string(c.utility.subsample);
  s["utility.bootstrap"] = std::to_string(c.utility.bootstrap);
  std::string estimands;
  for (const auto& e : c.utility.estimands) estimands += (estimands.empty() ? "" : ",") + e.label();
  s["utility.estimands"] = estimands;
  s["utility.regression_response"] = c.utility.log_price_response ? "log_price" : "price";
  std::string radii;
  for (const auto& r : c.risk.attribute_radii) radii += (radii.empty() ? "" : ",") + radius_text(r);
  s["risk.radii"] = radii;
  s["risk.id_radius"] = radius_text(c.risk.identification_radii);
  s["risk.id_log_price"] = c.risk.identification_radii.log_price_for_id ? "true" : "false";
  std::string grid;
  for (double x : c.risk.s_grid) grid += (grid.empty() ? "" : ",") + num(x);
  s["risk.s_grid"] = grid;
  s["risk.noise_law"] = c.risk.law == risk::NoisePolicy::Law::count_scaled ? "count_scaled" : "constant";
  return s;
}

}  // namespace partsyn::config
