// partsyn: partial synthesis of the AvailableDays and Price columns of a
// listings table, plus utility and disclosure-risk evaluation.

#include <cstdlib>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "partsyn/commands.hpp"
#include "partsyn/config.hpp"
#include "partsyn/error.hpp"

namespace {

enum ExitCode { kOk = 0, kUsage = 1, kData = 2, kModelFit = 3 };

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"partsyn: Bayesian and CART partial synthesis with utility and disclosure-risk reports"};
  app.require_subcommand(0, 1);
  app.fallthrough();

  std::optional<std::string> config_file;
  std::optional<std::string> input, out, method, collection, bayes_dir, cart_dir;
  std::optional<std::uint64_t> seed;
  std::optional<unsigned> threads;
  std::optional<std::size_t> m, sample_n;
  bool force = false;
  bool list_keys = false;
  std::vector<std::string> overrides;

  app.add_option("--config", config_file, "flat key = value configuration file");
  app.add_option("--input", input, "confidential CSV");
  app.add_option("--out", out, "output directory");
  app.add_option("--seed", seed, "master seed");
  app.add_option("--threads", threads, "worker cap (0: all cores)");
  app.add_option("--method", method, "bayes or cart");
  app.add_option("--m", m, "number of synthetic replicates");
  app.add_option("--sample-n", sample_n, "records sampled from the input (0: all)");
  app.add_option("--collection", collection, "replicate directory for utility and risk");
  app.add_option("--bayes", bayes_dir, "Bayesian replicate directory for compare");
  app.add_option("--cart", cart_dir, "CART replicate directory for compare");
  app.add_flag("--force", force, "synthesize even if convergence checks fail");
  app.add_option("--set", overrides, "extra key=value setting (repeatable)");
  app.add_flag("--list-keys", list_keys, "print every configuration key and exit");

  auto* describe = app.add_subcommand("describe", "summary statistics of AvailableDays and Price");
  auto* synthesize = app.add_subcommand("synthesize", "write m synthetic replicates");
  auto* utility = app.add_subcommand("utility", "global and analysis-specific utility of a collection");
  auto* risk = app.add_subcommand("risk", "attribute and identification disclosure risk of a collection");
  auto* compare = app.add_subcommand("compare", "side-by-side Bayesian and CART report");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kOk : kUsage;
  }

  if (list_keys) {
    for (const auto& [key, doc] : partsyn::config::documented_keys()) std::cout << key << "\t" << doc << "\n";
    return kOk;
  }
  if (app.get_subcommands().empty()) {
    std::cerr << app.help();
    return kUsage;
  }

  try {
    partsyn::config::Settings flags;
    for (const auto& kv : overrides) {
      const auto eq = kv.find('=');
      if (eq == std::string::npos) throw partsyn::UsageError("--set expects key=value, got '" + kv + "'");
      flags[kv.substr(0, eq)] = kv.substr(eq + 1);
    }
    if (input) flags["input"] = *input;
    if (out) flags["out"] = *out;
    if (seed) flags["seed"] = std::to_string(*seed);
    if (threads) flags["threads"] = std::to_string(*threads);
    if (method) flags["method"] = *method;
    if (m) flags["m"] = std::to_string(*m);
    if (sample_n) flags["sample_n"] = std::to_string(*sample_n);
    if (collection) flags["collection"] = *collection;
    if (bayes_dir) flags["bayes_collection"] = *bayes_dir;
    if (cart_dir) flags["cart_collection"] = *cart_dir;
    if (force) flags["force"] = "true";

    const auto cfg = partsyn::config::resolve(
        config_file ? std::optional<std::filesystem::path>(*config_file) : std::nullopt, flags);

    if (describe->parsed()) {
      std::cout << partsyn::commands::cmd_describe(cfg);
    } else if (synthesize->parsed()) {
      partsyn::commands::cmd_synthesize(cfg);
    } else if (utility->parsed()) {
      const auto r = partsyn::commands::cmd_utility(cfg);
      std::cout << "Up = " << r.up << "  Uc = " << r.uc;
      for (const auto& v : r.ecdf) std::cout << "  Um[" << v.variable << "] = " << v.um;
      std::cout << "\n";
    } else if (risk->parsed()) {
      const auto r = partsyn::commands::cmd_risk(cfg);
      for (const auto& a : r.attribute)
        std::cout << "AR(" << a.radii.r_avail << ", " << a.radii.r_price << "): confidential " << a.confidential
                  << ", synthetic " << a.synthetic << "\n";
      if (!r.sweep.empty())
        std::cout << "EMR at S = " << r.sweep.front().s << ": confidential " << r.sweep.front().confidential.emr
                  << ", synthetic " << r.sweep.front().synthetic.emr << "\n";
    } else if (compare->parsed()) {
      partsyn::commands::cmd_compare(cfg);
      std::cout << "wrote " << (cfg.out / "compare.json").string() << "\n";
    }
    return kOk;
  } catch (const partsyn::UsageError& e) {
    std::cerr << "partsyn: " << e.what() << "\n";
    return kUsage;
  } catch (const partsyn::DataError& e) {
    std::cerr << "partsyn: data error: " << e.what() << "\n";
    return kData;
  } catch (const partsyn::ModelFitError& e) {
    std::cerr << "partsyn: model fit failed: " << e.what() << "\n";
    return kModelFit;
  } catch (const std::invalid_argument& e) {
    std::cerr << "partsyn: " << e.what() << "\n";
    return kUsage;
  } catch (const std::exception& e) {
    std::cerr << "partsyn: " << e.what() << "\n";
    return kData;
  }
}
