#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "doctest.h"
#include "fewboost/dataset.hpp"
#include "fewboost/error.hpp"
#include "oracles.hpp"
#include "support.hpp"

using namespace fewboost;
using testing::numeric;

namespace {

Dataset one_column(std::vector<double> values) {
  std::vector<double> y(values.size(), 0.0);
  return Dataset({numeric("x", std::move(values))}, std::move(y), "y");
}

std::vector<std::size_t> bin_counts(const BinnedDataset& bds, std::size_t f) {
  std::vector<std::size_t> counts(bds.binnings[f].num_value_bins, 0);
  for (auto b : bds.bins[f]) {
    if (b < counts.size()) ++counts[b];
  }
  return counts;
}

}  // namespace

TEST_SUITE("dataset") {

TEST_CASE("load_csv types columns and keeps the target apart") {
  testing::TempDir dir("csv");
  testing::write_file(dir / "d.csv", "age,job,y\n31,b,1\n45,a,0\n,b,1\n");
  const Schema schema{{"age", ColumnRole::kNumeric},
                      {"job", ColumnRole::kCategorical},
                      {"y", ColumnRole::kTarget}};
  const Dataset ds = load_csv(dir / "d.csv", schema);
  CHECK(ds.n_rows() == 3);
  CHECK(ds.n_features() == 2);
  CHECK(ds.target_name() == "y");
  CHECK(ds.value(0, 0) == 31.0);
  CHECK(is_missing(ds.value(2, 0)));
  CHECK(ds.column(1).values == std::vector<double>{0, 1, 0});
  CHECK(ds.column(1).spec.categories == std::vector<std::string>{"b", "a"});
  CHECK(std::vector<double>(ds.target().begin(), ds.target().end()) == std::vector<double>{1, 0, 1});
}

TEST_CASE("quoted fields, CRLF line ends and ignored columns") {
  testing::TempDir dir("csv");
  testing::write_file(dir / "d.csv",
                      "\xEF\xBB\xBFid,city,x,y\r\n1,\"Paris, FR\",1.5,0\r\n2,\"say \"\"hi\"\"\",2.5,1\r\n\r\n");
  const Schema schema{{"id", ColumnRole::kIgnore},
                      {"city", ColumnRole::kCategorical},
                      {"x", ColumnRole::kNumeric},
                      {"y", ColumnRole::kTarget}};
  const Dataset ds = load_csv(dir / "d.csv", schema);
  CHECK(ds.n_rows() == 2);
  CHECK(ds.n_features() == 2);
  CHECK(ds.column(0).spec.categories == std::vector<std::string>{"Paris, FR", "say \"hi\""});
  CHECK(ds.value(1, 1) == 2.5);
}

TEST_CASE("load_csv errors carry their location") {
  testing::TempDir dir("csv");
  const Schema schema{{"x", ColumnRole::kNumeric}, {"y", ColumnRole::kTarget}};

  testing::write_file(dir / "bad.csv", "x,y\n1,0\nabc,1\n");
  try {
    load_csv(dir / "bad.csv", schema);
    FAIL("expected ParseError");
  } catch (const ParseError& e) {
    CHECK(e.row() == 3);
    CHECK(e.column() == 1);
  }

  testing::write_file(dir / "short.csv", "x,y\n1,0\n2\n");
  CHECK_THROWS_AS(load_csv(dir / "short.csv", schema), ParseError);

  testing::write_file(dir / "quote.csv", "x,y\n\"1,0\n");
  CHECK_THROWS_AS(load_csv(dir / "quote.csv", schema), ParseError);

  testing::write_file(dir / "notarget.csv", "x\n1\n");
  CHECK_THROWS_AS(load_csv(dir / "notarget.csv", Schema{{"x", ColumnRole::kNumeric}}), SchemaError);
  CHECK_THROWS_AS(load_csv(dir / "notarget.csv", schema), SchemaError);

  testing::write_file(dir / "extra.csv", "x,z,y\n1,2,0\n");
  CHECK_THROWS_AS(load_csv(dir / "extra.csv", schema), SchemaError);

  CHECK_THROWS_AS(load_csv(dir / "absent.csv", schema), Error);
}

TEST_CASE("schema files") {
  testing::TempDir dir("schema");
  testing::write_file(dir / "s.json", R"({"a": "numeric", "b": "categorical", "y": "target", "z": "ignore"})");
  const Schema s = load_schema(dir / "s.json");
  CHECK(s.size() == 4);
  CHECK(s.at("b") == ColumnRole::kCategorical);
  CHECK_THROWS_AS(parse_schema(nlohmann::json::parse(R"({"a": "text"})")), SchemaError);
  CHECK_THROWS_AS(parse_schema(nlohmann::json::parse("[1]")), SchemaError);
  testing::write_file(dir / "bad.json", "{");
  CHECK_THROWS_AS(load_schema(dir / "bad.json"), SchemaError);
  CHECK_THROWS_AS(load_schema(dir / "missing.json"), Error);

  testing::write_file(dir / "d.csv", "a,b,y\n1,u,0\n2,,1\n");
  const Schema inferred = infer_schema(dir / "d.csv", "y");
  CHECK(inferred.at("a") == ColumnRole::kNumeric);
  CHECK(inferred.at("b") == ColumnRole::kCategorical);
  CHECK(inferred.at("y") == ColumnRole::kTarget);
  CHECK_THROWS_AS(infer_schema(dir / "d.csv", "nope"), SchemaError);
}

TEST_CASE("layout loading maps unseen categories to missing") {
  testing::TempDir dir("layout");
  testing::write_file(dir / "d.csv", "job,x\nb,1\nzz,2\na,\n");
  const std::vector<FeatureSpec> layout{{"x", FeatureKind::kNumeric, {}},
                                        {"job", FeatureKind::kCategorical, {"a", "b"}}};
  const Dataset ds = load_csv_with_layout(dir / "d.csv", layout, "y");
  CHECK_FALSE(ds.has_target());
  CHECK(ds.n_features() == 2);
  CHECK(ds.value(0, 1) == 1.0);
  CHECK(is_missing(ds.value(1, 1)));
  CHECK(ds.value(2, 1) == 0.0);
  CHECK(is_missing(ds.value(2, 0)));
}

TEST_CASE("Dataset rejects ragged columns and non-code categoricals") {
  CHECK_THROWS_AS(Dataset({numeric("a", {1, 2}), numeric("b", {1})}, {0, 1}), ValidationError);
  CHECK_THROWS_AS(Dataset({numeric("a", {1, 2})}, {0}), ValidationError);
  CHECK_THROWS_AS(Dataset({testing::categorical("c", {0, 1.5})}, {0, 1}), ValidationError);
  CHECK_THROWS_AS(Dataset({testing::categorical("c", {0, -1})}, {0, 1}), ValidationError);
  CHECK_NOTHROW(Dataset({testing::categorical("c", {0, kMissing})}, {0, 1}));
}

TEST_CASE("subset and feature selection") {
  const Dataset ds({numeric("a", {1, 2, 3}), numeric("b", {4, 5, 6})}, {0, 1, 0}, "t");
  const std::vector<std::size_t> rows{2, 0};
  const Dataset sub = ds.subset(rows);
  CHECK(sub.n_rows() == 2);
  CHECK(sub.value(0, 1) == 6.0);
  CHECK(sub.target()[1] == 0.0);
  const std::vector<std::size_t> feats{1};
  const Dataset sel = ds.select_features(feats);
  CHECK(sel.n_features() == 1);
  CHECK(sel.column(0).spec.name == "b");
  CHECK(sel.n_rows() == 3);
  const Dataset wt = ds.with_target({5, 5, 5});
  CHECK(wt.target()[0] == 5.0);
}

TEST_CASE("equal-frequency binning on the worked examples") {
  SUBCASE("six values, three bins of two") {
    const auto bds = bin_features(one_column({1, 2, 3, 4, 5, 6}), 3, 2);
    CHECK(bds.binnings[0].num_value_bins == 3);
    CHECK(bin_counts(bds, 0) == std::vector<std::size_t>{2, 2, 2});
    CHECK(bds.bins[0] == std::vector<BinIndex>{0, 0, 1, 1, 2, 2});
    CHECK(bds.binnings[0].upper_bounds == std::vector<double>{2.5, 4.5});
  }
  SUBCASE("constant column is a single bin") {
    const auto bds = bin_features(one_column({7, 7, 7, 7}), 255, 3);
    CHECK(bds.binnings[0].num_value_bins == 1);
    CHECK(bds.binnings[0].upper_bounds.empty());
  }
  SUBCASE("1..100 gives 33 bins of at least 3 rows") {
    std::vector<double> v(100);
    std::iota(v.begin(), v.end(), 1.0);
    const auto bds = bin_features(one_column(v), 255, 3);
    const auto counts = bin_counts(bds, 0);
    CHECK(counts.size() == 33);
    CHECK(*std::min_element(counts.begin(), counts.end()) >= 3);
    CHECK(counts == oracle::equal_frequency_counts(v, 255, 3));
  }
  SUBCASE("four rows with min_data_in_bin 3 merge into one bin") {
    const auto bds = bin_features(one_column({1, 2, 3, 4}), 255, 3);
    CHECK(bds.binnings[0].num_value_bins == 1);
  }
}

TEST_CASE("binning rejects bad settings") {
  CHECK_THROWS_AS(bin_features(one_column({1, 2}), 1, 1), ValidationError);
  CHECK_THROWS_AS(bin_features(one_column({1, 2}), 4, 0), ValidationError);
}

TEST_CASE("missing values use the reserved last bin") {
  const auto bds = bin_features(one_column({1, kMissing, 2, 3, 4, 5, 6}), 3, 2);
  const auto& b = bds.binnings[0];
  CHECK(bds.bins[0][1] == b.missing_bin());
  CHECK(b.missing_bin() == b.num_value_bins);
  CHECK(b.bin_for(kMissing) == b.missing_bin());
}

TEST_CASE("categorical codes get one bin each and unseen codes go missing") {
  const Dataset ds({testing::categorical("c", {2, 0, 2, kMissing, 5})}, {0, 0, 1, 1, 0});
  const auto bds = bin_features(ds, 255, 3);
  const auto& b = bds.binnings[0];
  CHECK(b.num_value_bins == 3);
  CHECK(b.bin_codes == std::vector<std::int64_t>{0, 2, 5});
  CHECK(bds.bins[0] == std::vector<BinIndex>{1, 0, 1, 3, 2});
  CHECK(b.bin_for(4.0) == b.missing_bin());
}

TEST_CASE("binning properties on random columns") {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = 1 + rng() % 120;
    const std::uint32_t max_bin = 2 + static_cast<std::uint32_t>(rng() % 20);
    const std::uint32_t min_bin = 1 + static_cast<std::uint32_t>(rng() % 6);
    const int levels = 1 + static_cast<int>(rng() % 40);
    std::vector<double> v(n);
    std::vector<double> present;
    for (auto& x : v) {
      if (rng() % 10 == 0) {
        x = kMissing;
      } else {
        x = static_cast<double>(rng() % levels) * 0.37 - 3.0;
        present.push_back(x);
      }
    }
    const auto bds = bin_features(one_column(v), max_bin, min_bin);
    const auto& b = bds.binnings[0];
    CAPTURE(trial);

    CHECK(b.num_value_bins <= max_bin);
    CHECK(std::adjacent_find(b.upper_bounds.begin(), b.upper_bounds.end(),
                             std::greater_equal<>()) == b.upper_bounds.end());
    const auto counts = bin_counts(bds, 0);
    if (!present.empty()) {
      CHECK(counts == oracle::equal_frequency_counts(present, max_bin, min_bin));
      if (counts.size() > 1) {
        for (std::size_t i = 0; i + 1 < counts.size(); ++i) CHECK(counts[i] >= min_bin);
      }
    }
    for (std::size_t r = 0; r < n; ++r) {
      const auto bin = bds.bins[0][r];
      CHECK(bin < b.num_bins());
      if (is_missing(v[r])) {
        CHECK(bin == b.missing_bin());
        continue;
      }
      if (bin > 0) CHECK(v[r] > b.upper_bounds[bin - 1]);
      if (bin + 1u < b.num_value_bins) CHECK(v[r] <= b.upper_bounds[bin]);
    }
  }
}

TEST_CASE("binning is deterministic for the same file") {
  testing::TempDir dir("det");
  std::string text = "a,b,y\n";
  std::mt19937_64 rng(3);
  for (int i = 0; i < 200; ++i) {
    text += std::to_string(rng() % 1000 / 7.0) + "," + "c" + std::to_string(rng() % 5) + "," +
            std::to_string(rng() % 2) + "\n";
  }
  testing::write_file(dir / "d.csv", text);
  const Schema s{{"a", ColumnRole::kNumeric}, {"b", ColumnRole::kCategorical}, {"y", ColumnRole::kTarget}};
  const auto b1 = bin_features(load_csv(dir / "d.csv", s), 255, 3);
  const auto b2 = bin_features(load_csv(dir / "d.csv", s), 255, 3);
  CHECK(b1.bins == b2.bins);
  nlohmann::json j1 = b1.binnings, j2 = b2.binnings;
  CHECK(j1.dump() == j2.dump());
}

TEST_CASE("binning JSON round trip") {
  const auto bds = bin_features(one_column({0.5, 1, 2, 3, 4, 8, 9, 10}), 4, 2);
  const nlohmann::json j = bds.binnings[0];
  const auto back = j.get<FeatureBinning>();
  CHECK(back.num_value_bins == bds.binnings[0].num_value_bins);
  CHECK(back.upper_bounds == bds.binnings[0].upper_bounds);
  for (double x : {-1.0, 0.5, 2.2, 8.0, 100.0}) CHECK(back.bin_for(x) == bds.binnings[0].bin_for(x));
}

}  // TEST_SUITE
