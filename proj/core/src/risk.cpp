#include "partsyn/risk.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "partsyn/error.hpp"
#include "partsyn/parallel.hpp"
#include "partsyn/rng.hpp"

namespace partsyn::risk {
namespace {

using nlohmann::json;

constexpr std::uint64_t kNoiseStream = 0x7015e;
// exp(43) - 1 still fits in a signed 64-bit count.
constexpr double kMaxLogCount = 43.0;

bool attribute_similar(const data::Table& conf, std::size_t i, const data::Table& other, std::size_t j,
                       const MatchRadii& r) {
  const double dd = std::abs(static_cast<double>(other.days[j]) - static_cast<double>(conf.days[i]));
  const double dp = std::abs(other.price[j] - conf.price[i]) / conf.price[i];
  return dd <= r.r_avail && dp <= r.r_price;
}

bool identification_similar(const data::Table& conf, std::size_t i, const data::Table& other, std::size_t j,
                            const MatchRadii& r) {
  const double dd = std::abs(static_cast<double>(other.days[j]) - static_cast<double>(conf.days[i]));
  if (!(dd <= r.r_avail)) return false;
  if (r.log_price_for_id) {
    const double li = std::log(conf.price[i]);
    return std::abs(std::log(other.price[j]) - li) <= r.r_price * std::abs(li);
  }
  return std::abs(other.price[j] - conf.price[i]) <= r.r_price * conf.price[i];
}

std::string format_real(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

json opt(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

json summary_json(const IdentificationSummary& s) {
  return {{"EMR", s.emr}, {"TMR", s.tmr}, {"FMR", opt(s.fmr)}, {"u", s.u}};
}

}  // namespace

std::vector<MatchRadii> default_attribute_radii() {
  return {{5.0, 0.05, true}, {10.0, 0.05, true}, {10.0, 0.10, true}};
}

std::vector<double> default_s_grid() {
  std::vector<double> grid;
  for (int k = 0; k <= 15; ++k) grid.push_back(k / 100.0);
  return grid;
}

std::vector<std::int64_t> perturb_knowledge(std::span<const std::int64_t> reviews, const NoisePolicy& noise) {
  if (!(noise.s >= 0.0)) throw std::invalid_argument("noise level S must be non-negative");
  std::vector<std::int64_t> out(reviews.begin(), reviews.end());
  if (noise.s == 0.0) return out;
  Rng rng = make_stream(mix_seed(noise.seed, kNoiseStream), static_cast<std::uint64_t>(std::llround(noise.s * 1e6)));
  std::normal_distribution<double> normal;
  for (auto& rc : out) {
    const double z = normal(rng);
    const double sd = noise.law == NoisePolicy::Law::count_scaled ? noise.s * static_cast<double>(rc) : noise.s;
    const double draw = std::min(std::log(static_cast<double>(rc) + 1.0) + sd * z, kMaxLogCount);
    rc = std::max<std::int64_t>(0, std::llround(std::exp(draw) - 1.0));
  }
  return out;
}

std::size_t KeyIndex::KeyHash::operator()(const Key& k) const noexcept {
  std::uint64_t h = static_cast<std::uint64_t>(k.reviews);
  h = mix_seed(h, (static_cast<std::uint64_t>(static_cast<std::uint32_t>(k.room)) << 32) |
                      static_cast<std::uint32_t>(k.neighborhood));
  return static_cast<std::size_t>(h);
}

KeyIndex::KeyIndex(const data::Table& table) {
  for (std::size_t j = 0; j < table.size(); ++j) {
    const int room = rooms_.try_emplace(table.room_type[j], static_cast<int>(rooms_.size())).first->second;
    const int nb =
        neighborhoods_.try_emplace(table.neighborhood[j], static_cast<int>(neighborhoods_.size())).first->second;
    rows_[Key{room, nb, table.reviews[j]}].push_back(j);
  }
}

std::span<const std::size_t> KeyIndex::find(const std::string& room_type, const std::string& neighborhood,
                                             std::int64_t reviews) const {
  const auto r = rooms_.find(room_type);
  const auto n = neighborhoods_.find(neighborhood);
  if (r == rooms_.end() || n == neighborhoods_.end()) return {};
  const auto it = rows_.find(Key{r->second, n->second, reviews});
  if (it == rows_.end()) return {};
  return it->second;
}

MatchSet key_match(const data::Table& conf, std::size_t i, const KeyIndex& comparison,
                   std::optional<std::int64_t> known_reviews) {
  MatchSet m;
  m.target = i;
  const auto rows = comparison.find(conf.room_type[i], conf.neighborhood[i], known_reviews.value_or(conf.reviews[i]));
  m.rows.assign(rows.begin(), rows.end());
  return m;
}

double attribute_risk(const data::Table& conf, const data::Table& syn, const MatchRadii& radii) {
  const KeyIndex index(syn);
  double ar = 0.0;
  for (std::size_t i = 0; i < conf.size(); ++i) {
    const auto rows = index.find(conf.room_type[i], conf.neighborhood[i], conf.reviews[i]);
    if (rows.empty()) continue;
    std::size_t similar = 0;
    for (std::size_t j : rows)
      if (attribute_similar(conf, i, syn, j, radii)) ++similar;
    ar += static_cast<double>(similar) / static_cast<double>(rows.size());
  }
  return ar;
}

IdentificationResult identification_risk(const data::Table& conf, const data::Table& comparison,
                                         const MatchRadii& radii, std::span<const std::int64_t> known_reviews) {
  const std::size_t n = conf.size();
  if (comparison.size() != n) throw DataError("identification risk needs row-aligned tables of equal size");
  if (!known_reviews.empty() && known_reviews.size() != n)
    throw std::invalid_argument("known_reviews must have one entry per record");
  const KeyIndex index(comparison);
  IdentificationResult r;
  r.true_match.assign(n, 0);
  std::size_t true_unique = 0;
  std::size_t false_unique = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const std::int64_t rc = known_reviews.empty() ? conf.reviews[i] : known_reviews[i];
    std::size_t c = 0;
    bool self = false;
    for (std::size_t j : index.find(conf.room_type[i], conf.neighborhood[i], rc)) {
      if (!identification_similar(conf, i, comparison, j, radii)) continue;
      ++c;
      self = self || j == i;
    }
    r.true_match[i] = self ? 1 : 0;
    if (c > 0 && self) r.emr += 1.0 / static_cast<double>(c);
    if (c == 1) (self ? true_unique : false_unique)++;
  }
  r.u = true_unique + false_unique;
  r.tmr = n ? static_cast<double>(true_unique) / static_cast<double>(n) : 0.0;
  if (r.u > 0) r.fmr = static_cast<double>(false_unique) / static_cast<double>(r.u);
  return r;
}

IdentificationSummary summarize(const IdentificationResult& result) {
  return {result.emr, result.tmr, result.fmr, static_cast<double>(result.u)};
}

IdentificationSummary average(const std::vector<IdentificationResult>& results) {
  IdentificationSummary s;
  if (results.empty()) return s;
  const double m = static_cast<double>(results.size());
  double fmr = 0.0;
  std::size_t defined = 0;
  for (const auto& r : results) {
    s.emr += r.emr / m;
    s.tmr += r.tmr / m;
    s.u += static_cast<double>(r.u) / m;
    if (r.fmr) {
      fmr += *r.fmr;
      ++defined;
    }
  }
  if (defined) s.fmr = fmr / static_cast<double>(defined);
  return s;
}

std::vector<SweepRow> uncertainty_sweep(const data::Table& conf, const std::vector<data::Table>& replicates,
                                        const MatchRadii& radii, const std::vector<double>& s_grid,
                                        std::uint64_t seed, NoisePolicy::Law law, unsigned threads) {
  if (s_grid.empty()) throw std::invalid_argument("S grid is empty");
  const std::size_t m = replicates.size();
  std::vector<std::vector<std::int64_t>> known(s_grid.size());
  for (std::size_t k = 0; k < s_grid.size(); ++k)
    known[k] = perturb_knowledge(conf.reviews, {s_grid[k], seed, law});

  // Task (k, 0) is the confidential baseline, (k, l + 1) replicate l.
  std::vector<IdentificationResult> results(s_grid.size() * (m + 1));
  parallel_for(results.size(), threads, [&](std::size_t t) {
    const std::size_t k = t / (m + 1);
    const std::size_t l = t % (m + 1);
    const data::Table& other = l == 0 ? conf : replicates[l - 1];
    results[t] = identification_risk(conf, other, radii, known[k]);
    results[t].true_match.clear();
  });

  std::vector<SweepRow> rows;
  for (std::size_t k = 0; k < s_grid.size(); ++k) {
    SweepRow row;
    row.s = s_grid[k];
    row.confidential = summarize(results[k * (m + 1)]);
    std::vector<IdentificationResult> syn(results.begin() + static_cast<std::ptrdiff_t>(k * (m + 1) + 1),
                                          results.begin() + static_cast<std::ptrdiff_t>((k + 1) * (m + 1)));
    for (const auto& r : syn) row.replicates.push_back(summarize(r));
    row.synthetic = average(syn);
    rows.push_back(std::move(row));
  }
  return rows;
}

RiskReport evaluate_risk(const data::Table& conf, const std::vector<data::Table>& replicates,
                         const RiskOptions& options) {
  if (replicates.empty()) throw std::invalid_argument("risk evaluation needs at least one replicate");
  for (std::size_t l = 0; l < replicates.size(); ++l)
    if (replicates[l].size() != conf.size())
      throw DataError("replicate " + std::to_string(l + 1) + " has " + std::to_string(replicates[l].size()) +
                      " rows, expected " + std::to_string(conf.size()));
  RiskReport report;
  report.n = conf.size();
  report.m = replicates.size();
  report.identification_radii = options.identification_radii;

  const std::size_t m = replicates.size();
  const std::size_t per = m + 1;
  std::vector<double> ar(options.attribute_radii.size() * per);
  parallel_for(ar.size(), options.threads, [&](std::size_t t) {
    const auto& radii = options.attribute_radii[t / per];
    const std::size_t l = t % per;
    ar[t] = attribute_risk(conf, l == 0 ? conf : replicates[l - 1], radii);
  });
  for (std::size_t k = 0; k < options.attribute_radii.size(); ++k) {
    AttributeRow row;
    row.radii = options.attribute_radii[k];
    row.confidential = ar[k * per];
    for (std::size_t l = 0; l < m; ++l) {
      row.replicates.push_back(ar[k * per + l + 1]);
      row.synthetic += ar[k * per + l + 1] / static_cast<double>(m);
    }
    report.attribute.push_back(std::move(row));
  }
  report.sweep = uncertainty_sweep(conf, replicates, options.identification_radii, options.s_grid, options.seed,
                                   options.law, options.threads);
  return report;
}

std::string risk_json(const RiskReport& r) {
  json j;
  j["schema_version"] = 1;
  j["n"] = r.n;
  j["m"] = r.m;
  j["attribute"] = json::array();
  for (const auto& a : r.attribute)
    j["attribute"].push_back({{"r_avail", a.radii.r_avail},
                              {"r_price", a.radii.r_price},
                              {"confidential_AR", a.confidential},
                              {"synthetic_AR", a.synthetic},
                              {"synthetic_AR_per_replicate", a.replicates}});
  j["identification"] = {{"r_avail", r.identification_radii.r_avail},
                         {"r_price", r.identification_radii.r_price},
                         {"log_price", r.identification_radii.log_price_for_id},
                         {"sweep", json::array()}};
  for (const auto& row : r.sweep) {
    json per = json::array();
    for (const auto& s : row.replicates) per.push_back(summary_json(s));
    j["identification"]["sweep"].push_back({{"S", row.s},
                                            {"confidential", summary_json(row.confidential)},
                                            {"synthetic", summary_json(row.synthetic)},
                                            {"synthetic_per_replicate", per}});
  }
  return j.dump(2) + "\n";
}

void write_sweep_csv(const RiskReport& report, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path.string());
  out << "S,dataset,EMR,TMR,FMR,u\n";
  auto row = [&](double s, const std::string& dataset, const IdentificationSummary& v) {
    out << format_real(s) << ',' << dataset << ',' << format_real(v.emr) << ',' << format_real(v.tmr) << ','
        << (v.fmr ? format_real(*v.fmr) : std::string("NA")) << ',' << format_real(v.u) << '\n';
  };
  for (const auto& r : report.sweep) {
    row(r.s, "confidential", r.confidential);
    row(r.s, "synthetic", r.synthetic);
  }
}

}  // namespace partsyn::risk
