#pragma once

#include <cstddef>
#include <filesystem>
#include <string>

#include "partsyn/config.hpp"
#include "partsyn/risk.hpp"
#include "partsyn/synthesis.hpp"
#include "partsyn/utility.hpp"

namespace partsyn::commands {

struct Confidential {
  data::Table table;
  std::size_t valid_rows = 0;
  std::size_t rejected_rows = 0;
};

/// Loads the input (Airbnb column names unless overridden; falls back to the
/// canonical header) and draws the configured sample.
Confidential load_confidential(const config::RunConfig& config);

/// Summary statistics of AvailableDays and Price; writes out/describe.json.
std::string cmd_describe(const config::RunConfig& config);

/// Writes the replicate files and provenance into `config.out`.
synthesis::SyntheticCollection cmd_synthesize(const config::RunConfig& config);

/// Writes out/utility.json and out/utility_intervals.csv.
utility::UtilityReport cmd_utility(const config::RunConfig& config);

/// Writes out/risk.json and out/risk_sweep.csv.
risk::RiskReport cmd_risk(const config::RunConfig& config);

/// Builds any missing collection, evaluates both methods and writes
/// out/compare.json. Returns the JSON text.
std::string cmd_compare(const config::RunConfig& config);

}  // namespace partsyn::commands
