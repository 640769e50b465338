#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "partsyn/data.hpp"

namespace partsyn::risk {

struct MatchRadii {
  /// Absolute AvailableDays tolerance.
  double r_avail = 5.0;
  /// Relative Price tolerance.
  double r_price = 0.05;
  /// Identification matching compares |log p_j - log p_i| with r_price * |log p_i|
  /// when set, otherwise |p_j - p_i| with r_price * p_i.
  bool log_price_for_id = true;
};

/// The three radius pairs evaluated by default for attribute risk.
std::vector<MatchRadii> default_attribute_radii();

/// S = 0.00, 0.01, ..., 0.15.
std::vector<double> default_s_grid();

struct NoisePolicy {
  enum class Law {
    /// log RC* ~ Normal(log(RC + 1), S * RC)
    count_scaled,
    /// log RC* ~ Normal(log(RC + 1), S)
    constant,
  };
  double s = 0.0;
  std::uint64_t seed = 1;
  Law law = Law::count_scaled;
};

/// The intruder's copy of ReviewsCount: RC* = max(0, round(exp(draw) - 1)).
/// S = 0 returns the input unchanged.
std::vector<std::int64_t> perturb_knowledge(std::span<const std::int64_t> reviews, const NoisePolicy& noise);

/// Hash index from the key triple (RoomType, Neighborhood, ReviewsCount) to
/// row indices of one table.
class KeyIndex {
 public:
  explicit KeyIndex(const data::Table& table);

  /// Rows whose keys equal the given triple, in ascending order.
  std::span<const std::size_t> find(const std::string& room_type, const std::string& neighborhood,
                                    std::int64_t reviews) const;

 private:
  struct Key {
    int room = 0;
    int neighborhood = 0;
    std::int64_t reviews = 0;
    bool operator==(const Key&) const = default;
  };
  struct KeyHash {
    std::size_t operator()(const Key& k) const noexcept;
  };
  std::unordered_map<std::string, int> rooms_;
  std::unordered_map<std::string, int> neighborhoods_;
  std::unordered_map<Key, std::vector<std::size_t>, KeyHash> rows_;
};

struct MatchSet {
  std::size_t target = 0;
  std::vector<std::size_t> rows;
  std::size_t count() const { return rows.size(); }
};

/// Rows of the comparison table sharing record i's keys, with record i's
/// ReviewsCount replaced by `known_reviews` when given.
MatchSet key_match(const data::Table& conf, std::size_t i, const KeyIndex& comparison,
                   std::optional<std::int64_t> known_reviews = std::nullopt);

/// AR = sum over records of the share of key-matched comparison records with
/// similar AvailableDays and Price. Pass `conf` as `syn` for the baseline.
double attribute_risk(const data::Table& conf, const data::Table& syn, const MatchRadii& radii);

struct IdentificationResult {
  double emr = 0.0;
  double tmr = 0.0;
  /// Empty when there are no unique matches.
  std::optional<double> fmr;
  std::size_t u = 0;
  /// T_i: whether record i is in its own refined match set.
  std::vector<char> true_match;
};

/// `known_reviews` is the intruder's ReviewsCount for each confidential
/// record; empty means exact knowledge.
IdentificationResult identification_risk(const data::Table& conf, const data::Table& comparison,
                                         const MatchRadii& radii, std::span<const std::int64_t> known_reviews = {});

struct IdentificationSummary {
  double emr = 0.0;
  double tmr = 0.0;
  std::optional<double> fmr;
  double u = 0.0;
};

/// Averages over replicates; FMR is averaged over replicates where defined.
IdentificationSummary average(const std::vector<IdentificationResult>& results);
IdentificationSummary summarize(const IdentificationResult& result);

struct SweepRow {
  double s = 0.0;
  IdentificationSummary confidential;
  IdentificationSummary synthetic;
  std::vector<IdentificationSummary> replicates;
};

/// One noise draw per S, shared by the confidential baseline and every
/// replicate evaluated at that S.
std::vector<SweepRow> uncertainty_sweep(const data::Table& conf, const std::vector<data::Table>& replicates,
                                        const MatchRadii& radii, const std::vector<double>& s_grid,
                                        std::uint64_t seed, NoisePolicy::Law law = NoisePolicy::Law::count_scaled,
                                        unsigned threads = 0);

struct AttributeRow {
  MatchRadii radii;
  double confidential = 0.0;
  double synthetic = 0.0;
  std::vector<double> replicates;
};

struct RiskOptions {
  std::vector<MatchRadii> attribute_radii = default_attribute_radii();
  MatchRadii identification_radii;
  std::vector<double> s_grid = default_s_grid();
  std::uint64_t seed = 1;
  NoisePolicy::Law law = NoisePolicy::Law::count_scaled;
  unsigned threads = 0;
};

struct RiskReport {
  std::size_t n = 0;
  std::size_t m = 0;
  std::vector<AttributeRow> attribute;
  MatchRadii identification_radii;
  std::vector<SweepRow> sweep;
};

RiskReport evaluate_risk(const data::Table& conf, const std::vector<data::Table>& replicates,
                         const RiskOptions& options = {});

std::string risk_json(const RiskReport& report);

/// Tidy sweep rows: S,dataset,EMR,TMR,FMR,u.
void write_sweep_csv(const RiskReport& report, const std::filesystem::path& path);

}  // namespace partsyn::risk
