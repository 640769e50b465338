#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <sstream>

#include "partsyn/csv.hpp"
#include "partsyn/data.hpp"
#include "partsyn/error.hpp"
#include "partsyn/rng.hpp"
#include "scratch.hpp"
#include "surrogate.hpp"

using namespace partsyn;
using partsyn::testing::ScratchDir;
using partsyn::testing::write_file;

namespace {

const char* kAirbnbHeader = "id,name,neighbourhood_group,room_type,number_of_reviews,availability_365,price\n";

data::Table small_table() {
  data::Table t;
  t.push_back("Brooklyn", "Private room", 9, 365, 149);
  t.push_back("Manhattan", "Entire home/apt", 45, 355, 225);
  t.push_back("Manhattan", "Private room", 0, 365, 150);
  t.push_back("Queens", "Shared room", 270, 194, 89.5);
  t.push_back("Bronx", "Entire home/apt", 9, 0, 80);
  return t;
}

}  // namespace

TEST(Schema, AirbnbSchemaFlagsOnlyOutcomesAsSensitive) {
  const auto schema = data::airbnb_schema();
  ASSERT_EQ(schema.size(), 5u);
  std::map<std::string, data::ColumnSchema> by_name;
  for (const auto& c : schema) by_name[c.name] = c;
  EXPECT_TRUE(by_name["AvailableDays"].sensitive);
  EXPECT_TRUE(by_name["Price"].sensitive);
  EXPECT_FALSE(by_name["Neighborhood"].sensitive);
  EXPECT_FALSE(by_name["RoomType"].sensitive);
  EXPECT_FALSE(by_name["ReviewsCount"].sensitive);
  EXPECT_EQ(by_name["Neighborhood"].kind, data::ColumnKind::categorical);
  EXPECT_EQ(by_name["RoomType"].kind, data::ColumnKind::categorical);
  EXPECT_EQ(by_name["ReviewsCount"].kind, data::ColumnKind::count);
  EXPECT_EQ(by_name["AvailableDays"].kind, data::ColumnKind::count);
  EXPECT_EQ(by_name["Price"].kind, data::ColumnKind::continuous);
  EXPECT_EQ(by_name["Neighborhood"].source_column, "neighbourhood_group");
  EXPECT_EQ(by_name["AvailableDays"].source_column, "availability_365");
  for (const auto& c : schema) EXPECT_FALSE(c.source_column.empty());
}

TEST(Schema, OverridesReplaceSourceColumns) {
  const auto schema = data::with_source_columns(data::airbnb_schema(), {{"Price", "nightly_rate"}});
  for (const auto& c : schema)
    if (c.name == "Price") EXPECT_EQ(c.source_column, "nightly_rate");
}

TEST(LoadCsv, CleanFileLoadsEveryRow) {
  ScratchDir dir("load");
  write_file(dir / "a.csv", std::string(kAirbnbHeader) +
                                "1,a,Brooklyn,Private room,9,365,149\n"
                                "2,b,Manhattan,Entire home/apt,45,355,225\n"
                                "3,\"c, with comma\",Manhattan,Private room,0,365,150\n"
                                "4,d,Manhattan,Entire home/apt,270,194,89\n"
                                "5,e,Bronx,Entire home/apt,9,0,80\n");
  const auto r = data::load_csv(dir / "a.csv", data::airbnb_schema());
  EXPECT_EQ(r.table.size(), 5u);
  EXPECT_EQ(r.rejected, 0u);
  EXPECT_EQ(r.table.neighborhood[2], "Manhattan");
  EXPECT_EQ(r.table.reviews[3], 270);
}

TEST(LoadCsv, NonNumericPriceIsRejectedAndCounted) {
  ScratchDir dir("load");
  write_file(dir / "a.csv", std::string(kAirbnbHeader) +
                                "1,a,Brooklyn,Private room,9,365,abc\n"
                                "2,b,Manhattan,Entire home/apt,45,355,225\n");
  const auto r = data::load_csv(dir / "a.csv", data::airbnb_schema());
  EXPECT_EQ(r.table.size(), 1u);
  EXPECT_EQ(r.rejected, 1u);
}

TEST(LoadCsv, AvailabilityAboveSupportIsRejected) {
  ScratchDir dir("load");
  write_file(dir / "a.csv", std::string(kAirbnbHeader) +
                                "1,a,Brooklyn,Private room,9,400,100\n"
                                "2,b,Brooklyn,Private room,9,365,100\n"
                                "3,b,Brooklyn,Private room,9,-1,100\n"
                                "4,b,Brooklyn,Private room,-2,3,100\n"
                                "5,b,Brooklyn,Private room,2,3,0\n"
                                "6,b,,Private room,2,3,10\n");
  const auto r = data::load_csv(dir / "a.csv", data::airbnb_schema());
  EXPECT_EQ(r.table.size(), 1u);
  EXPECT_EQ(r.rejected, 5u);
  EXPECT_EQ(r.table.days[0], 365);
}

TEST(LoadCsv, Errors) {
  ScratchDir dir("load");
  EXPECT_THROW(data::load_csv(dir / "missing.csv", data::airbnb_schema()), DataError);

  write_file(dir / "nocol.csv", "neighbourhood_group,room_type,number_of_reviews,price\nBronx,Private room,1,10\n");
  try {
    data::load_csv(dir / "nocol.csv", data::airbnb_schema());
    FAIL() << "expected DataError";
  } catch (const DataError& e) {
    EXPECT_NE(std::string(e.what()).find("availability_365"), std::string::npos);
  }

  write_file(dir / "allbad.csv", std::string(kAirbnbHeader) + "1,a,Bronx,Private room,1,999,10\n");
  EXPECT_THROW(data::load_csv(dir / "allbad.csv", data::airbnb_schema()), DataError);
}

TEST(LoadCsv, RoundTripPreservesValues) {
  ScratchDir dir("roundtrip");
  auto t = partsyn::testing::surrogate_listings(500, 3);
  // Non-integer prices exercise the shortest round-trip formatting.
  for (std::size_t i = 0; i < t.size(); i += 7) t.price[i] += 0.123456789;
  data::write_csv(t, dir / "t.csv");
  const auto back = data::load_csv(dir / "t.csv", data::canonical_schema());
  EXPECT_EQ(back.rejected, 0u);
  EXPECT_EQ(back.table.days, t.days);
  EXPECT_EQ(back.table.reviews, t.reviews);
  EXPECT_EQ(back.table.neighborhood, t.neighborhood);
  EXPECT_EQ(back.table.room_type, t.room_type);
  for (std::size_t i = 0; i < t.size(); ++i) EXPECT_NEAR(back.table.price[i], t.price[i], 5e-7);
  EXPECT_EQ(back.table.price, t.price);
}

TEST(SampleRecords, FullSampleIsAPermutationOfTheRows) {
  const auto t = partsyn::testing::surrogate_listings(300, 5);
  const auto s = data::sample_records(t, t.size(), 9);
  ASSERT_EQ(s.size(), t.size());
  auto key = [](const data::Table& x) {
    std::vector<std::string> rows;
    for (std::size_t i = 0; i < x.size(); ++i) {
      std::ostringstream os;
      os << x.neighborhood[i] << '|' << x.room_type[i] << '|' << x.reviews[i] << '|' << x.days[i] << '|'
         << x.price[i];
      rows.push_back(os.str());
    }
    std::sort(rows.begin(), rows.end());
    return rows;
  };
  EXPECT_EQ(key(s), key(t));
}

TEST(SampleRecords, DeterministicAndWithoutReplacement) {
  data::Table t;
  for (int i = 0; i < 1000; ++i) t.push_back("N", "R", i, i % 366, 1.0 + i);
  const auto a = data::sample_records(t, 100, 42);
  const auto b = data::sample_records(t, 100, 42);
  const auto c = data::sample_records(t, 100, 43);
  EXPECT_EQ(a, b);
  EXPECT_NE(a, c);
  ASSERT_EQ(a.size(), 100u);
  // reviews encode the row index: distinct, in source order.
  EXPECT_TRUE(std::is_sorted(a.reviews.begin(), a.reviews.end()));
  EXPECT_EQ(std::adjacent_find(a.reviews.begin(), a.reviews.end()), a.reviews.end());
  EXPECT_THROW(data::sample_records(t, 1001, 1), DataError);
}

TEST(EncodeDesign, ColumnCountUnderDefaultCoding) {
  data::Table t;
  const std::vector<std::string> rooms = {"Entire home/apt", "Private room", "Shared room"};
  const std::vector<std::string> nbs = {"Bronx", "Brooklyn", "Manhattan", "Queens", "Staten Island"};
  for (std::size_t i = 0; i < 15; ++i) t.push_back(nbs[i % 5], rooms[i % 3], static_cast<std::int64_t>(i), 1, 10);
  const auto d = data::encode_design(t);
  EXPECT_EQ(d.cols(), 3u + 4u + 1u);
  EXPECT_EQ(d.rows(), 15u);
  EXPECT_EQ(d.column("Neighborhood", "Bronx"), -1);
  EXPECT_EQ(d.column("RoomType", "Entire home/apt"), 0);
  EXPECT_THROW(d.column("RoomType", "Hotel room"), DataError);
}

TEST(EncodeDesign, IndicatorsAndReviewTransform) {
  const auto t = small_table();
  const auto d = data::encode_design(t);
  const auto rooms = d.levels.room_types.size();
  for (std::size_t i = 0; i < t.size(); ++i) {
    const auto row = d.row(i);
    const double room_sum = std::accumulate(row.begin(), row.begin() + static_cast<long>(rooms), 0.0);
    EXPECT_EQ(room_sum, 1.0);
    const int nb = d.column("Neighborhood", t.neighborhood[i]);
    double nb_sum = 0.0;
    for (std::size_t j = rooms; j + 1 < d.cols(); ++j) nb_sum += row[j];
    EXPECT_EQ(nb_sum, nb < 0 ? 0.0 : 1.0);
    EXPECT_DOUBLE_EQ(row[d.cols() - 1], std::log(static_cast<double>(t.reviews[i]) + 1.0));
    EXPECT_TRUE(std::isfinite(row[d.cols() - 1]));
  }
  EXPECT_EQ(d.row(2)[d.cols() - 1], 0.0);
  EXPECT_EQ(d.row(0)[static_cast<std::size_t>(d.column("RoomType", "Private room"))], 1.0);
}

TEST(EncodeDesign, ReferenceCodedRoomTypeWithIntercept) {
  const auto t = small_table();
  const auto d = data::encode_design(t, {.full_room_type = false, .intercept = true});
  EXPECT_EQ(d.column_names.front(), "(Intercept)");
  EXPECT_EQ(d.cols(), 1u + 2u + 3u + 1u);
  for (std::size_t i = 0; i < t.size(); ++i) EXPECT_EQ(d.row(i)[0], 1.0);
}

TEST(EncodeDesign, UnseenLevelIsReported) {
  const auto t = small_table();
  const auto levels = data::LevelDictionary::from(t);
  data::Table other;
  other.push_back("Staten Island", "Private room", 1, 1, 1);
  try {
    data::encode_design(other, levels);
    FAIL() << "expected DataError";
  } catch (const DataError& e) {
    EXPECT_NE(std::string(e.what()).find("Staten Island"), std::string::npos);
  }
}

TEST(EncodeDesign, PermutingRowsPermutesDesignRows) {
  const auto t = partsyn::testing::surrogate_listings(200, 11);
  std::vector<std::size_t> perm(t.size());
  std::iota(perm.begin(), perm.end(), 0);
  auto rng = make_stream(5, 0);
  std::shuffle(perm.begin(), perm.end(), rng);
  const auto d = data::encode_design(t);
  const auto dp = data::encode_design(data::take_rows(t, perm), d.levels);
  for (std::size_t i = 0; i < perm.size(); ++i)
    for (std::size_t j = 0; j < d.cols(); ++j) ASSERT_EQ(dp.row(i)[j], d.row(perm[i])[j]);
  EXPECT_EQ(data::encode_design(t).x, d.x);
}

TEST(Table, ValidateRejectsOutOfSupportValues) {
  auto t = small_table();
  EXPECT_NO_THROW(t.validate());
  t.days[0] = 366;
  EXPECT_THROW(t.validate(), DataError);
  t = small_table();
  t.price[0] = 0.0;
  EXPECT_THROW(t.validate(), DataError);
}

TEST(Csv, QuotedFieldsAndCrlf) {
  std::istringstream in("a,\"b \"\"q\"\"\",\"line\nbreak\"\r\nx,y,z\r\n");
  csv::Reader r(in);
  const auto first = r.next();
  ASSERT_TRUE(first);
  EXPECT_EQ((*first)[1], "b \"q\"");
  EXPECT_EQ((*first)[2], "line\nbreak");
  const auto second = r.next();
  ASSERT_TRUE(second);
  EXPECT_EQ(second->size(), 3u);
  EXPECT_EQ((*second)[2], "z");
  EXPECT_EQ(r.line(), 3u);
  EXPECT_FALSE(r.next());
}

TEST(Csv, EscapeQuotesOnlyWhenNeeded) {
  EXPECT_EQ(csv::escape("plain"), "plain");
  EXPECT_EQ(csv::escape("a,b"), "\"a,b\"");
  EXPECT_EQ(csv::escape("say \"hi\""), "\"say \"\"hi\"\"\"");
  std::ostringstream out;
  csv::write_row(out, {"Entire home/apt", "x,y"});
  std::istringstream in(out.str());
  csv::Reader r(in);
  EXPECT_EQ(*r.next(), (std::vector<std::string>{"Entire home/apt", "x,y"}));
}

TEST(Rng, StreamsAreReproducibleAndDistinct) {
  auto a = make_stream(1, 2);
  auto b = make_stream(1, 2);
  auto c = make_stream(1, 3);
  const auto x = a();
  EXPECT_EQ(x, b());
  EXPECT_NE(x, c());
  EXPECT_NE(mix_seed(1, 2), mix_seed(2, 1));
}
