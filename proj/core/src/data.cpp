#include "partsyn/data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numeric>
#include <optional>
#include <sstream>

#include "partsyn/csv.hpp"
#include "partsyn/error.hpp"
#include "partsyn/rng.hpp"

namespace partsyn::data {
namespace {

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t");
  return s.substr(first, last - first + 1);
}

template <typename T>
std::optional<T> parse_integer(std::string_view s) {
  s = trim(s);
  if (s.empty()) return std::nullopt;
  T value{};
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
  if (ec != std::errc() || ptr != s.data() + s.size()) return std::nullopt;
  return value;
}

std::optional<double> parse_real(std::string_view s) {
  s = trim(s);
  if (s.empty()) return std::nullopt;
  double value = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
  if (ec != std::errc() || ptr != s.data() + s.size() || !std::isfinite(value)) return std::nullopt;
  return value;
}

std::string format_real(double v) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

const ColumnSchema& find_column(const std::vector<ColumnSchema>& schema, std::string_view name) {
  for (const auto& c : schema)
    if (c.name == name) return c;
  throw DataError("schema has no column named " + std::string(name));
}

}  // namespace

std::vector<ColumnSchema> airbnb_schema() {
  return {
      {std::string(kNeighborhood), ColumnKind::categorical, false, "neighbourhood_group"},
      {std::string(kRoomType), ColumnKind::categorical, false, "room_type"},
      {std::string(kReviewsCount), ColumnKind::count, false, "number_of_reviews"},
      {std::string(kAvailableDays), ColumnKind::count, true, "availability_365"},
      {std::string(kPrice), ColumnKind::continuous, true, "price"},
  };
}

std::vector<ColumnSchema> canonical_schema() {
  auto schema = airbnb_schema();
  for (auto& c : schema) c.source_column = c.name;
  return schema;
}

std::vector<ColumnSchema> with_source_columns(std::vector<ColumnSchema> schema,
                                              const std::map<std::string, std::string>& overrides) {
  for (auto& c : schema) {
    if (auto it = overrides.find(c.name); it != overrides.end()) c.source_column = it->second;
  }
  return schema;
}

void Table::reserve(std::size_t n) {
  neighborhood.reserve(n);
  room_type.reserve(n);
  reviews.reserve(n);
  days.reserve(n);
  price.reserve(n);
}

void Table::push_back(std::string nb, std::string rt, std::int64_t rc, int d, double p) {
  neighborhood.push_back(std::move(nb));
  room_type.push_back(std::move(rt));
  reviews.push_back(rc);
  days.push_back(d);
  price.push_back(p);
}

void Table::validate() const {
  const std::size_t n = days.size();
  if (neighborhood.size() != n || room_type.size() != n || reviews.size() != n || price.size() != n)
    throw DataError("table columns have unequal lengths");
  for (std::size_t i = 0; i < n; ++i) {
    if (days[i] < 0 || days[i] > kMaxAvailableDays)
      throw DataError("row " + std::to_string(i) + ": AvailableDays outside 0..365");
    if (!(price[i] > 0.0) || !std::isfinite(price[i]))
      throw DataError("row " + std::to_string(i) + ": Price must be positive");
    if (reviews[i] < 0) throw DataError("row " + std::to_string(i) + ": negative ReviewsCount");
    if (neighborhood[i].empty() || room_type[i].empty())
      throw DataError("row " + std::to_string(i) + ": empty category");
  }
}

LoadResult load_csv(const std::filesystem::path& path, const std::vector<ColumnSchema>& schema) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open input file: " + path.string());

  csv::Reader reader(in);
  const auto header = reader.next();
  if (!header) throw DataError("empty input file: " + path.string());

  auto index_of = [&](std::string_view name) -> std::size_t {
    const auto& col = find_column(schema, name);
    for (std::size_t i = 0; i < header->size(); ++i) {
      if (trim((*header)[i]) == col.source_column) return i;
    }
    throw DataError("input " + path.string() + " is missing required column '" + col.source_column +
                    "' (" + col.name + ")");
  };
  const std::size_t i_nb = index_of(kNeighborhood);
  const std::size_t i_rt = index_of(kRoomType);
  const std::size_t i_rc = index_of(kReviewsCount);
  const std::size_t i_days = index_of(kAvailableDays);
  const std::size_t i_price = index_of(kPrice);
  const std::size_t needed = std::max({i_nb, i_rt, i_rc, i_days, i_price}) + 1;

  LoadResult result;
  result.schema = schema;
  while (auto row = reader.next()) {
    if (row->size() == 1 && trim((*row)[0]).empty()) continue;  // blank line
    if (row->size() < needed) {
      ++result.rejected;
      continue;
    }
    const auto nb = trim((*row)[i_nb]);
    const auto rt = trim((*row)[i_rt]);
    const auto rc = parse_integer<std::int64_t>((*row)[i_rc]);
    const auto days = parse_integer<int>((*row)[i_days]);
    const auto price = parse_real((*row)[i_price]);
    if (nb.empty() || rt.empty() || !rc || *rc < 0 || !days || *days < 0 ||
        *days > kMaxAvailableDays || !price || !(*price > 0.0)) {
      ++result.rejected;
      continue;
    }
    result.table.push_back(std::string(nb), std::string(rt), *rc, *days, *price);
  }
  if (result.table.size() == 0)
    throw DataError("no valid rows in " + path.string() + " (" + std::to_string(result.rejected) +
                    " rejected)");
  return result;
}

void write_csv(const Table& table, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  csv::write_row(out, {std::string(kNeighborhood), std::string(kRoomType), std::string(kReviewsCount),
                       std::string(kAvailableDays), std::string(kPrice)});
  for (std::size_t i = 0; i < table.size(); ++i) {
    csv::write_row(out, {table.neighborhood[i], table.room_type[i], std::to_string(table.reviews[i]),
                         std::to_string(table.days[i]), format_real(table.price[i])});
  }
  if (!out) throw DataError("write failed: " + path.string());
}

Table take_rows(const Table& table, const std::vector<std::size_t>& rows) {
  Table out;
  out.reserve(rows.size());
  for (std::size_t r : rows) {
    out.push_back(table.neighborhood.at(r), table.room_type.at(r), table.reviews.at(r), table.days.at(r),
                  table.price.at(r));
  }
  return out;
}

Table sample_records(const Table& table, std::size_t n, std::uint64_t seed) {
  if (n > table.size())
    throw DataError("cannot sample " + std::to_string(n) + " rows from a table of " +
                    std::to_string(table.size()));
  std::vector<std::size_t> idx(table.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  Rng rng = make_stream(seed, 0x5a3d1e);
  // Partial Fisher-Yates: the first n slots are a uniform sample.
  for (std::size_t i = 0; i < n; ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, idx.size() - 1);
    std::swap(idx[i], idx[pick(rng)]);
  }
  idx.resize(n);
  std::sort(idx.begin(), idx.end());
  return take_rows(table, idx);
}

// ---------------------------------------------------------------------------

LevelDictionary LevelDictionary::from(const Table& table) {
  LevelDictionary d;
  d.room_types = table.room_type;
  d.neighborhoods = table.neighborhood;
  for (auto* v : {&d.room_types, &d.neighborhoods}) {
    std::sort(v->begin(), v->end());
    v->erase(std::unique(v->begin(), v->end()), v->end());
  }
  return d;
}

int DesignMatrix::column(std::string_view variable, std::string_view level) const {
  const std::string key = std::string(variable) + "=" + std::string(level);
  const auto it = level_columns.find(key);
  if (it == level_columns.end()) throw DataError("unknown level " + key);
  return it->second;
}

double transform_reviews(std::int64_t reviews) { return std::log1p(static_cast<double>(reviews)); }

DesignMatrix encode_design(const Table& table, const CodingPolicy& coding) {
  return encode_design(table, LevelDictionary::from(table), coding);
}

DesignMatrix encode_design(const Table& table, const LevelDictionary& levels, const CodingPolicy& coding) {
  if (levels.room_types.empty() || levels.neighborhoods.empty())
    throw DataError("cannot encode a design without category levels");

  DesignMatrix d;
  d.levels = levels;
  d.coding = coding;

  if (coding.intercept) d.column_names.emplace_back("(Intercept)");
  const std::size_t room_first = coding.full_room_type ? 0 : 1;
  for (std::size_t k = 0; k < levels.room_types.size(); ++k) {
    const std::string key = std::string(kRoomType) + "=" + levels.room_types[k];
    if (k < room_first) {
      d.level_columns[key] = -1;
      continue;
    }
    d.level_columns[key] = static_cast<int>(d.column_names.size());
    d.column_names.push_back(key);
  }
  for (std::size_t k = 0; k < levels.neighborhoods.size(); ++k) {
    const std::string key = std::string(kNeighborhood) + "=" + levels.neighborhoods[k];
    if (k == 0) {
      d.level_columns[key] = -1;
      continue;
    }
    d.level_columns[key] = static_cast<int>(d.column_names.size());
    d.column_names.push_back(key);
  }
  const auto reviews_col = static_cast<Eigen::Index>(d.column_names.size());
  d.column_names.emplace_back("log1p(ReviewsCount)");

  const auto n = static_cast<Eigen::Index>(table.size());
  d.x = RowMatrix::Zero(n, static_cast<Eigen::Index>(d.column_names.size()));
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto r = static_cast<std::size_t>(i);
    if (coding.intercept) d.x(i, 0) = 1.0;
    const auto rt = d.level_columns.find(std::string(kRoomType) + "=" + table.room_type[r]);
    if (rt == d.level_columns.end())
      throw DataError("unseen RoomType level '" + table.room_type[r] + "' at row " + std::to_string(r));
    if (rt->second >= 0) d.x(i, rt->second) = 1.0;
    const auto nb = d.level_columns.find(std::string(kNeighborhood) + "=" + table.neighborhood[r]);
    if (nb == d.level_columns.end())
      throw DataError("unseen Neighborhood level '" + table.neighborhood[r] + "' at row " +
                      std::to_string(r));
    if (nb->second >= 0) d.x(i, nb->second) = 1.0;
    d.x(i, reviews_col) = transform_reviews(table.reviews[r]);
  }
  return d;
}

}  // namespace partsyn::data
