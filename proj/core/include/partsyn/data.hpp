#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Core>

namespace partsyn::data {

inline constexpr int kMaxAvailableDays = 365;

enum class ColumnKind { categorical, count, continuous };

/// One of the five analysis columns and where it lives in the raw file.
struct ColumnSchema {
  std::string name;
  ColumnKind kind = ColumnKind::categorical;
  bool sensitive = false;
  std::string source_column;
};

// Canonical column names. Replicate files and reports use exactly these.
inline constexpr std::string_view kNeighborhood = "Neighborhood";
inline constexpr std::string_view kRoomType = "RoomType";
inline constexpr std::string_view kReviewsCount = "ReviewsCount";
inline constexpr std::string_view kAvailableDays = "AvailableDays";
inline constexpr std::string_view kPrice = "Price";

/// Schema for the public NYC Airbnb listings file
/// (neighbourhood_group, room_type, number_of_reviews, availability_365, price).
std::vector<ColumnSchema> airbnb_schema();

/// Schema whose source columns equal the canonical names (replicate files).
std::vector<ColumnSchema> canonical_schema();

/// Replaces source_column for any canonical name present in `overrides`.
std::vector<ColumnSchema> with_source_columns(std::vector<ColumnSchema> schema,
                                              const std::map<std::string, std::string>& overrides);

/// Column-oriented table of the five analysis variables. Row i of every column
/// belongs to the same listing. Immutable by convention once built.
struct Table {
  std::vector<std::string> neighborhood;
  std::vector<std::string> room_type;
  std::vector<std::int64_t> reviews;
  std::vector<int> days;
  std::vector<double> price;

  std::size_t size() const { return days.size(); }
  void reserve(std::size_t n);
  void push_back(std::string nb, std::string rt, std::int64_t rc, int d, double p);

  /// Throws DataError unless all columns have equal length and every value is
  /// within its support (days in 0..365, price > 0, reviews >= 0).
  void validate() const;

  bool operator==(const Table&) const = default;
};

struct LoadResult {
  Table table;
  std::size_t rejected = 0;
  std::vector<ColumnSchema> schema;
};

/// Reads a CSV with a header row. Rows failing type or support checks are
/// dropped and counted. Throws DataError for a missing file, a missing
/// required column, or when no row survives.
LoadResult load_csv(const std::filesystem::path& path, const std::vector<ColumnSchema>& schema);

/// Writes the canonical header and one row per record. Prices are written in
/// shortest round-trip form, so reading back gives identical doubles.
void write_csv(const Table& table, const std::filesystem::path& path);

/// Uniform sample of n rows without replacement, returned in original row order.
Table sample_records(const Table& table, std::size_t n, std::uint64_t seed);

/// Rows selected by index, in the given order.
Table take_rows(const Table& table, const std::vector<std::size_t>& rows);

// ---------------------------------------------------------------------------
// Design encoding

struct CodingPolicy {
  /// true: one indicator per RoomType level (acts as group intercepts).
  /// false: reference-coded like Neighborhood.
  bool full_room_type = true;
  /// Adds a leading column of ones.
  bool intercept = false;
};

/// Sorted category levels seen in the fitting data.
struct LevelDictionary {
  std::vector<std::string> room_types;
  std::vector<std::string> neighborhoods;

  static LevelDictionary from(const Table& table);
};

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

struct DesignMatrix {
  RowMatrix x;
  std::vector<std::string> column_names;
  LevelDictionary levels;
  CodingPolicy coding;
  /// label -> column index ("RoomType=Private room"). The Neighborhood
  /// reference level maps to -1.
  std::map<std::string, int> level_columns;

  std::size_t rows() const { return static_cast<std::size_t>(x.rows()); }
  std::size_t cols() const { return static_cast<std::size_t>(x.cols()); }
  std::span<const double> row(std::size_t i) const {
    return {x.data() + i * cols(), cols()};
  }
  int column(std::string_view variable, std::string_view level) const;
};

double transform_reviews(std::int64_t reviews);

DesignMatrix encode_design(const Table& table, const CodingPolicy& coding = {});

/// Encodes with a fixed dictionary; throws DataError naming any level that was
/// not seen when the dictionary was built.
DesignMatrix encode_design(const Table& table, const LevelDictionary& levels,
                           const CodingPolicy& coding = {});

}  // namespace partsyn::data
