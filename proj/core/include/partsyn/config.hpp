#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>

#include "partsyn/cart.hpp"
#include "partsyn/risk.hpp"
#include "partsyn/synthesis.hpp"
#include "partsyn/utility.hpp"

namespace partsyn::config {

using Settings = std::map<std::string, std::string>;

/// Everything a pipeline run depends on. Every field has a default; see
/// `documented_keys()` for the file and flag names.
struct RunConfig {
  std::filesystem::path input;
  /// Canonical column name -> source column in the input file.
  std::map<std::string, std::string> columns;
  /// Records drawn from the input; 0 or a value >= the row count keeps all.
  std::size_t sample_n = 10000;
  std::uint64_t seed = 1;
  std::size_t m = 20;
  std::string method = "bayes";
  std::filesystem::path out = "partsyn_out";
  unsigned threads = 0;
  bool force = false;

  /// Replicate directories read by utility, risk and compare. Empty means
  /// `out` (utility, risk) or `out/bayes` and `out/cart` (compare).
  std::filesystem::path collection;
  std::filesystem::path bayes_collection;
  std::filesystem::path cart_collection;

  mcmc::ChainConfig chain;
  models::ZitpOptions zitp;
  models::PriceOptions price;
  double max_rhat = 1.2;
  cart::TreeControls cart;
  utility::UtilityOptions utility;
  risk::RiskOptions risk;

  synthesis::SynthesisConfig synthesis_config() const;
};

/// key -> one-line description with the default value.
const std::map<std::string, std::string>& documented_keys();

/// Flat `key = value` text; `#` starts a comment. Throws UsageError with the
/// line number for malformed lines or repeated keys.
Settings parse_settings(std::string_view text);

Settings read_settings_file(const std::filesystem::path& path);

/// Applies settings over `config`. Relative paths are resolved against
/// `base_dir`. Throws UsageError for unknown keys or bad values.
void apply(RunConfig& config, const Settings& settings, const std::filesystem::path& base_dir = {});

/// Defaults, then the file (if any), then `flags`.
RunConfig resolve(const std::optional<std::filesystem::path>& file, const Settings& flags);

/// Canonical settings that determine output bytes (excludes out, threads,
/// force and collection paths).
Settings snapshot(const RunConfig& config);

}  // namespace partsyn::config
