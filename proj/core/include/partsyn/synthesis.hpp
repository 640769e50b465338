#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "partsyn/data.hpp"
#include "partsyn/mcmc.hpp"
#include "partsyn/models.hpp"

namespace partsyn::synthesis {

/// The three key columns kept unchanged in every replicate.
struct KeyColumns {
  std::vector<std::string> neighborhood;
  std::vector<std::string> room_type;
  std::vector<std::int64_t> reviews;

  std::size_t size() const { return reviews.size(); }
  static KeyColumns of(const data::Table& table);
  bool operator==(const KeyColumns&) const = default;
};

struct SyntheticReplicate {
  std::size_t index = 1;
  std::vector<int> days;
  std::vector<double> price;
  std::shared_ptr<const KeyColumns> keys;

  data::Table to_table() const;
};

struct ModelSummary {
  std::string model;
  std::optional<double> max_rhat;
  std::optional<double> min_ess;
  /// Mean random-walk acceptance over tracked parameters; empty when every
  /// tracked parameter is drawn by Gibbs or block updates.
  std::optional<double> mean_acceptance;
};

struct Provenance {
  std::uint64_t seed = 0;
  std::string method = "bayes";
  std::size_t m = 0;
  std::string config_hash;
  /// Flattened configuration, sorted by key.
  std::map<std::string, std::string> config;
  std::vector<ModelSummary> diagnostics;
};

struct SyntheticCollection {
  std::vector<SyntheticReplicate> replicates;
  Provenance provenance;

  std::size_t m() const { return replicates.size(); }
  std::vector<data::Table> tables() const;
};

struct SynthesisConfig {
  std::size_t m = 20;
  std::uint64_t seed = 1;
  mcmc::ChainConfig chain;
  models::ZitpOptions zitp;
  models::PriceOptions price;
  /// Largest tolerated split-R-hat over the coefficient parameters.
  double max_rhat = 1.2;
  bool force = false;
  unsigned threads = 0;
};

/// Canonical text of every field that affects the output, one `key = value`
/// per line in key order.
std::map<std::string, std::string> flatten(const SynthesisConfig& config);

/// 64-bit FNV-1a of the flattened config, as 16 hex digits.
std::string config_hash(const std::map<std::string, std::string>& flat);

/// Posterior fits of both models on the confidential data plus the m
/// parameter sets used for synthesis.
struct FittedModels {
  data::LevelDictionary levels;
  std::size_t n_coef = 0;
  mcmc::PosteriorDraws days_draws;
  mcmc::PosteriorDraws price_draws;
  std::optional<mcmc::DiagnosticsReport> days_diagnostics;
  std::optional<mcmc::DiagnosticsReport> price_diagnostics;
  std::vector<models::ZitpDraw> days_sets;
  std::vector<models::PriceParams> price_sets;
  models::ZitpOptions zitp;
};

/// Fits both models. Throws ModelFitError when any coefficient's R-hat exceeds
/// `max_rhat`, unless `force` is set.
FittedModels fit_models(const data::Table& table, const SynthesisConfig& config);

/// Draws one replicate per parameter set. Only the key columns are visible
/// here, so confidential outcomes cannot leak into the draws.
SyntheticCollection synthesize_from_fit(const FittedModels& fit, const KeyColumns& keys, std::uint64_t seed,
                                        unsigned threads = 0);

SyntheticCollection sequential_synthesize(const data::Table& table, const SynthesisConfig& config);

/// synthetic_1.csv ... synthetic_m.csv plus provenance.json.
void write_collection(const SyntheticCollection& collection, const std::filesystem::path& dir);

/// Reads a directory written by write_collection. Throws DataError naming a
/// missing replicate file or a replicate whose key columns differ.
SyntheticCollection read_collection(const std::filesystem::path& dir);

std::string provenance_json(const Provenance& provenance);

}  // namespace partsyn::synthesis
