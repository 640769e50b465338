#include "partsyn/commands.hpp"

#include <cmath>
#include <fstream>
#include <iostream>
#include <numeric>

#include <nlohmann/json.hpp>

#include "partsyn/cart.hpp"
#include "partsyn/csv.hpp"
#include "partsyn/error.hpp"
#include "partsyn/models.hpp"

namespace partsyn::commands {
namespace {

using nlohmann::json;

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  out << text;
}

void ensure_dir(const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw DataError("cannot create " + dir.string() + ": " + ec.message());
}

std::vector<std::string> read_header(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open input file: " + path.string());
  csv::Reader reader(in);
  auto header = reader.next();
  if (!header) throw DataError("empty input file: " + path.string());
  for (auto& h : *header) {
    const auto b = h.find_first_not_of(" \t\r");
    const auto e = h.find_last_not_of(" \t\r");
    h = b == std::string::npos ? std::string() : h.substr(b, e - b + 1);
  }
  return *header;
}

json column_summary(const std::vector<double>& v) {
  const double mean = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
  return {{"n", v.size()},
          {"mean", mean},
          {"min", utility::quantile(v, 0.0)},
          {"q25", utility::quantile(v, 0.25)},
          {"median", utility::quantile(v, 0.5)},
          {"q75", utility::quantile(v, 0.75)},
          {"max", utility::quantile(v, 1.0)}};
}

std::filesystem::path out_or(const std::filesystem::path& p, const std::filesystem::path& fallback) {
  return p.empty() ? fallback : p;
}

std::vector<data::Table> load_replicates(const std::filesystem::path& dir, const data::Table& conf) {
  const auto collection = synthesis::read_collection(dir);
  if (collection.m() < 2) throw DataError(dir.string() + ": a collection needs at least two replicates");
  auto tables = collection.tables();
  const auto keys = synthesis::KeyColumns::of(conf);
  if (!(synthesis::KeyColumns::of(tables.front()) == keys))
    throw DataError(dir.string() + ": replicate key columns do not match the configured input sample");
  return tables;
}

synthesis::SyntheticCollection synthesize(const config::RunConfig& c, const data::Table& conf,
                                          const std::filesystem::path& dir) {
  synthesis::SyntheticCollection collection;
  if (c.method == "cart") {
    std::cerr << "partsyn: fitting CART trees on " << conf.size() << " records\n";
    collection = cart::cart_sequential_synthesize(conf, c.m, c.cart, c.seed, c.threads);
  } else {
    std::cerr << "partsyn: fitting both models on " << conf.size() << " records (" << c.chain.n_chains << " x "
              << c.chain.warmup << "+" << c.chain.keep << " iterations)\n";
    auto sc = c.synthesis_config();
    const auto fit = synthesis::fit_models(conf, sc);
    collection = synthesis::synthesize_from_fit(fit, synthesis::KeyColumns::of(conf), c.seed, c.threads);
    ensure_dir(dir);
    auto names_of = [](const mcmc::PosteriorDraws& d) { return d.names; };
    auto sets_of = [&](const mcmc::PosteriorDraws& d) {
      if (sc.chain.selection == mcmc::SelectionPolicy::independent_chains) {
        auto s = mcmc::last_draw_per_chain(d);
        s.resize(c.m);
        return s;
      }
      return mcmc::select_parameter_sets(d, c.m, sc.chain.min_gap);
    };
    models::write_parameter_sets_csv(names_of(fit.days_draws), sets_of(fit.days_draws),
                                     dir / "parameters_AvailableDays.csv");
    models::write_parameter_sets_csv(names_of(fit.price_draws), sets_of(fit.price_draws),
                                     dir / "parameters_Price.csv");
  }
  auto& p = collection.provenance;
  p.config = config::snapshot(c);
  p.config["method"] = c.method;
  p.config_hash = synthesis::config_hash(p.config);
  synthesis::write_collection(collection, dir);
  std::cerr << "partsyn: wrote " << collection.m() << " replicates to " << dir.string() << "\n";
  return collection;
}

json interval_json(const utility::IntervalEstimate& i) {
  return {{"point", i.point}, {"lower", i.lower}, {"upper", i.upper}};
}

json opt(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

json id_json(const risk::IdentificationSummary& s) {
  return {{"EMR", s.emr}, {"TMR", s.tmr}, {"FMR", opt(s.fmr)}, {"u", s.u}};
}

}  // namespace

Confidential load_confidential(const config::RunConfig& c) {
  if (c.input.empty()) throw UsageError("no input file given (--input or input = ...)");
  if (!std::filesystem::exists(c.input)) throw DataError("input file not found: " + c.input.string());

  auto schema = data::with_source_columns(data::airbnb_schema(), c.columns);
  const auto header = read_header(c.input);
  const bool has_all = std::all_of(schema.begin(), schema.end(), [&](const data::ColumnSchema& s) {
    return std::find(header.begin(), header.end(), s.source_column) != header.end();
  });
  if (!has_all) {
    auto canonical = data::with_source_columns(data::canonical_schema(), c.columns);
    const bool canonical_ok = std::all_of(canonical.begin(), canonical.end(), [&](const data::ColumnSchema& s) {
      return std::find(header.begin(), header.end(), s.source_column) != header.end();
    });
    if (canonical_ok) schema = std::move(canonical);
  }
  auto loaded = data::load_csv(c.input, schema);
  Confidential out;
  out.valid_rows = loaded.table.size();
  out.rejected_rows = loaded.rejected;
  if (c.sample_n == 0 || c.sample_n >= loaded.table.size()) {
    if (c.sample_n > loaded.table.size())
      std::cerr << "partsyn: input has " << loaded.table.size() << " valid rows, fewer than sample_n = " << c.sample_n
                << "; using all of them\n";
    out.table = std::move(loaded.table);
  } else {
    out.table = data::sample_records(loaded.table, c.sample_n, c.seed);
  }
  return out;
}

std::string cmd_describe(const config::RunConfig& c) {
  const auto conf = load_confidential(c);
  const auto& t = conf.table;
  json j;
  j["schema_version"] = 1;
  j["input"] = c.input.string();
  j["valid_rows"] = conf.valid_rows;
  j["rejected_rows"] = conf.rejected_rows;
  j["sample_n"] = t.size();
  j["seed"] = c.seed;
  j["AvailableDays"] = column_summary(std::vector<double>(t.days.begin(), t.days.end()));
  j["AvailableDays"]["zero_fraction"] =
      static_cast<double>(std::count(t.days.begin(), t.days.end(), 0)) / static_cast<double>(t.size());
  j["Price"] = column_summary(t.price);
  const std::string text = j.dump(2) + "\n";
  ensure_dir(c.out);
  write_text(c.out / "describe.json", text);
  return text;
}

synthesis::SyntheticCollection cmd_synthesize(const config::RunConfig& c) {
  const auto conf = load_confidential(c);
  return synthesize(c, conf.table, c.out);
}

utility::UtilityReport cmd_utility(const config::RunConfig& c) {
  const auto conf = load_confidential(c);
  const auto replicates = load_replicates(out_or(c.collection, c.out), conf.table);
  const auto report = utility::evaluate_utility(conf.table, replicates, c.utility);
  ensure_dir(c.out);
  write_text(c.out / "utility.json", utility::utility_json(report));
  utility::write_interval_csv(report, c.out / "utility_intervals.csv");
  return report;
}

risk::RiskReport cmd_risk(const config::RunConfig& c) {
  const auto conf = load_confidential(c);
  const auto replicates = load_replicates(out_or(c.collection, c.out), conf.table);
  const auto report = risk::evaluate_risk(conf.table, replicates, c.risk);
  ensure_dir(c.out);
  write_text(c.out / "risk.json", risk::risk_json(report));
  risk::write_sweep_csv(report, c.out / "risk_sweep.csv");
  return report;
}

std::string cmd_compare(const config::RunConfig& c) {
  const auto conf = load_confidential(c);
  struct Side {
    std::string method;
    std::filesystem::path dir;
    utility::UtilityReport utility;
    risk::RiskReport risk;
  };
  std::vector<Side> sides = {{"bayes", out_or(c.bayes_collection, c.out / "bayes"), {}, {}},
                             {"cart", out_or(c.cart_collection, c.out / "cart"), {}, {}}};
  for (auto& s : sides) {
    if (!std::filesystem::exists(s.dir / "provenance.json")) {
      auto cc = c;
      cc.method = s.method;
      synthesize(cc, conf.table, s.dir);
    }
    const auto replicates = load_replicates(s.dir, conf.table);
    s.utility = utility::evaluate_utility(conf.table, replicates, c.utility);
    s.risk = risk::evaluate_risk(conf.table, replicates, c.risk);
  }

  json j;
  j["schema_version"] = 1;
  j["n"] = conf.table.size();
  j["methods"] = {"bayes", "cart"};
  j["collections"] = {{"bayes", sides[0].dir.string()}, {"cart", sides[1].dir.string()}};
  auto both = [&](auto&& get) { return json{{"bayes", get(sides[0])}, {"cart", get(sides[1])}}; };
  j["utility"]["Up"] = both([](const Side& s) { return s.utility.up; });
  j["utility"]["Uc"] = both([](const Side& s) { return s.utility.uc; });
  for (std::size_t v = 0; v < sides[0].utility.ecdf.size(); ++v) {
    const auto& name = sides[0].utility.ecdf[v].variable;
    j["utility"]["ecdf"][name]["Um"] = both([v](const Side& s) { return s.utility.ecdf[v].um; });
    j["utility"]["ecdf"][name]["Ua"] = both([v](const Side& s) { return s.utility.ecdf[v].ua; });
  }
  for (const char* group : {"estimands", "regression"}) {
    const bool est = std::string(group) == "estimands";
    const auto& ref = est ? sides[0].utility.estimands : sides[0].utility.regression;
    j["utility"][group] = json::array();
    for (std::size_t k = 0; k < ref.size(); ++k) {
      auto entry = [&](const Side& s) -> const utility::EstimandEntry& {
        return est ? s.utility.estimands[k] : s.utility.regression[k];
      };
      j["utility"][group].push_back(
          {{"label", ref[k].label},
           {"confidential", interval_json(ref[k].confidential)},
           {"combined", both([&](const Side& s) { return interval_json(entry(s).combined.interval); })},
           {"overlap", both([&](const Side& s) { return opt(entry(s).overlap); })},
           {"overlap_defined", both([&](const Side& s) { return entry(s).overlap_defined; })}});
    }
  }
  j["attribute_risk"] = json::array();
  for (std::size_t k = 0; k < sides[0].risk.attribute.size(); ++k) {
    const auto& row = sides[0].risk.attribute[k];
    j["attribute_risk"].push_back({{"r_avail", row.radii.r_avail},
                                   {"r_price", row.radii.r_price},
                                   {"confidential", row.confidential},
                                   {"bayes", sides[0].risk.attribute[k].synthetic},
                                   {"cart", sides[1].risk.attribute[k].synthetic}});
  }
  j["identification_risk"] = json::array();
  for (std::size_t k = 0; k < sides[0].risk.sweep.size(); ++k) {
    const auto& row = sides[0].risk.sweep[k];
    j["identification_risk"].push_back({{"S", row.s},
                                        {"confidential", id_json(row.confidential)},
                                        {"bayes", id_json(sides[0].risk.sweep[k].synthetic)},
                                        {"cart", id_json(sides[1].risk.sweep[k].synthetic)}});
  }
  const std::string text = j.dump(2) + "\n";
  ensure_dir(c.out);
  write_text(c.out / "compare.json", text);
  return text;
}

}  // namespace partsyn::commands
