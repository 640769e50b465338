#include <gtest/gtest.h>

#include "partsyn/config.hpp"
#include "partsyn/error.hpp"
#include "scratch.hpp"

using namespace partsyn;
using namespace partsyn::config;
using partsyn::testing::ScratchDir;
using partsyn::testing::write_file;

TEST(ParseSettings, CommentsWhitespaceAndErrors) {
  const auto s = parse_settings("# header\nseed = 7\n  m=5   # trailing\n\nmethod = cart\n");
  EXPECT_EQ(s.at("seed"), "7");
  EXPECT_EQ(s.at("m"), "5");
  EXPECT_EQ(s.at("method"), "cart");
  EXPECT_EQ(s.size(), 3u);
  try {
    parse_settings("seed = 1\nseed = 2\n");
    FAIL() << "expected UsageError";
  } catch (const UsageError& e) {
    EXPECT_NE(std::string(e.what()).find("line 2"), std::string::npos);
  }
  EXPECT_THROW(parse_settings("just words\n"), UsageError);
  EXPECT_THROW(parse_settings(" = 3\n"), UsageError);
}

TEST(Apply, UnknownKeysAndBadValues) {
  RunConfig c;
  EXPECT_THROW(apply(c, {{"sedd", "1"}}), UsageError);
  EXPECT_THROW(apply(c, {{"m", "1"}}), UsageError);
  EXPECT_THROW(apply(c, {{"m", "-3"}}), UsageError);
  EXPECT_THROW(apply(c, {{"method", "forest"}}), UsageError);
  EXPECT_THROW(apply(c, {{"utility.bootstrap", "100"}}), UsageError);
  EXPECT_THROW(apply(c, {{"risk.radii", "5"}}), UsageError);
  EXPECT_THROW(apply(c, {{"risk.s_grid", "0,-0.1"}}), UsageError);
  EXPECT_THROW(apply(c, {{"column.Colour", "x"}}), UsageError);
  EXPECT_THROW(apply(c, {{"force", "maybe"}}), UsageError);
}

TEST(Apply, ParsesStructuredValues) {
  RunConfig c;
  apply(c, {{"risk.radii", "1:0.01, 2:0.02"},
            {"risk.s_grid", "0,0.05"},
            {"risk.noise_law", "constant"},
            {"utility.estimands", "mean:Price,q0.5:AvailableDays"},
            {"utility.regression_response", "log_price"},
            {"mcmc.selection", "independent"},
            {"model.tau_is_sd", "true"},
            {"column.Price", "cost"},
            {"seed", "42"},
            {"threads", "2"}});
  ASSERT_EQ(c.risk.attribute_radii.size(), 2u);
  EXPECT_DOUBLE_EQ(c.risk.attribute_radii[1].r_price, 0.02);
  EXPECT_EQ(c.risk.s_grid, (std::vector<double>{0.0, 0.05}));
  EXPECT_EQ(c.risk.law, risk::NoisePolicy::Law::constant);
  ASSERT_EQ(c.utility.estimands.size(), 2u);
  EXPECT_EQ(c.utility.estimands[1].label(), "q0.5:AvailableDays");
  EXPECT_TRUE(c.utility.log_price_response);
  EXPECT_EQ(c.chain.selection, mcmc::SelectionPolicy::independent_chains);
  EXPECT_TRUE(c.zitp.tau_is_sd);
  EXPECT_EQ(c.columns.at("Price"), "cost");
  // The master seed and thread cap propagate to every stage.
  EXPECT_EQ(c.utility.seed, 42u);
  EXPECT_EQ(c.risk.seed, 42u);
  EXPECT_EQ(c.risk.threads, 2u);
  EXPECT_EQ(c.chain.threads, 2u);
}

TEST(Resolve, FlagsOverrideFileOverrideDefaults) {
  ScratchDir dir("config");
  write_file(dir / "run.cfg", "seed = 5\nm = 4\ninput = data/listings.csv\nout = results\n");
  const RunConfig defaults;
  const auto c = resolve(dir / "run.cfg", {{"m", "6"}});
  EXPECT_EQ(c.seed, 5u);
  EXPECT_EQ(c.m, 6u);
  EXPECT_EQ(c.sample_n, defaults.sample_n);
  EXPECT_EQ(c.method, defaults.method);
  // Relative paths in a file resolve against the file's directory.
  EXPECT_EQ(c.input, dir / "data/listings.csv");
  EXPECT_EQ(c.out, dir / "results");
  const auto flagged = resolve(dir / "run.cfg", {{"out", "elsewhere"}});
  EXPECT_EQ(flagged.out, std::filesystem::current_path() / "elsewhere");
  EXPECT_THROW(resolve(dir / "missing.cfg", {}), UsageError);
}

TEST(DocumentedKeys, EverySnapshotKeyIsDocumented) {
  const auto& docs = documented_keys();
  RunConfig c;
  c.columns["Price"] = "price";
  for (const auto& [key, value] : snapshot(c)) {
    const bool documented = docs.count(key) || (key.rfind("column.", 0) == 0 && docs.count("column.<Name>"));
    EXPECT_TRUE(documented) << key;
  }
  // Every documented key except the column pattern is accepted by apply.
  for (const auto& [key, doc] : docs) {
    if (key == "column.<Name>") continue;
    RunConfig probe;
    const auto snap = snapshot(probe);
    const auto it = snap.find(key);
    if (it == snap.end()) continue;
    EXPECT_NO_THROW(apply(probe, {{key, it->second}})) << key;
  }
}

TEST(Snapshot, RoundTripsThroughApplyAndIgnoresRunControls) {
  RunConfig c;
  apply(c, {{"seed", "9"}, {"risk.s_grid", "0,0.02,0.04"}, {"cart.complexity", "0.001"}});
  const auto snap = snapshot(c);
  RunConfig back;
  apply(back, snap);
  EXPECT_EQ(snapshot(back), snap);

  RunConfig other = c;
  apply(other, {{"threads", "3"}, {"out", "/tmp/x"}, {"force", "true"}});
  EXPECT_EQ(snapshot(other), snap);
  EXPECT_EQ(synthesis::config_hash(synthesis::flatten(c.synthesis_config())),
            synthesis::config_hash(synthesis::flatten(other.synthesis_config())));
}
