#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <random>
#include <set>

#include "doctest.h"
#include "fewboost/error.hpp"
#include "fewboost/metrics.hpp"
#include "fewboost/stacking.hpp"
#include "fewboost/synthetic.hpp"
#include "oracles.hpp"
#include "support.hpp"

using namespace fewboost;

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

std::array<std::size_t, 3> count_actions(const std::vector<int>& a) {
  std::array<std::size_t, 3> c{0, 0, 0};
  for (int v : a) ++c[static_cast<std::size_t>(v + 1)];
  return c;
}

double mean_abs_diff(const std::vector<int>& a, const std::vector<int>& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += std::abs(a[i] - b[i]);
  return s / static_cast<double>(a.size());
}

StackingOptions quick_options(std::size_t k) {
  StackingOptions o;
  o.k_per_model = k;
  o.seed = 3;
  return o;
}

}  // namespace

TEST_SUITE("stacking") {

TEST_CASE("partition leaves the remainder to the meta pool") {
  const ShotPartition p = partition_shots(10, 3, 3, 1);
  REQUIRE(p.shots.size() == 3);
  CHECK(p.meta_pool.size() == 1);
  std::set<std::size_t> all(p.meta_pool.begin(), p.meta_pool.end());
  for (const auto& s : p.shots) {
    CHECK(s.size() == 3);
    CHECK(std::is_sorted(s.begin(), s.end()));
    all.insert(s.begin(), s.end());
  }
  CHECK(all.size() == 10);

  CHECK(partition_shots(9, 3, 3, 1).meta_pool.empty());
  CHECK_THROWS_WITH_AS(partition_shots(9, 4, 3, 1), doctest::Contains("capacity"), ValidationError);
  CHECK(partition_shots(10, 3, 3, 1).shots == p.shots);
  CHECK(partition_shots(10, 3, 3, 2).shots != p.shots);
}

TEST_CASE("partition property: disjoint and exhaustive") {
  std::mt19937_64 rng(12);
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t m = 1 + rng() % 6;
    const std::size_t k = 1 + rng() % 20;
    const std::size_t n = m * k + rng() % 30;
    const ShotPartition p = partition_shots(n, k, m, rng());
    std::set<std::size_t> all(p.meta_pool.begin(), p.meta_pool.end());
    std::size_t total = p.meta_pool.size();
    for (const auto& s : p.shots) {
      total += s.size();
      all.insert(s.begin(), s.end());
    }
    CAPTURE(trial);
    CHECK(total == n);
    CHECK(all.size() == n);
    CHECK(p.meta_pool.size() == n - m * k);
    if (!all.empty()) CHECK(*all.rbegin() == n - 1);
  }
}

TEST_CASE("quantile and winsorize") {
  const std::vector<double> v{-100, 1, 2, 3, 100};
  CHECK(quantile(v, 0.25) == oracle::quantile(v, 0.25));
  CHECK(quantile(v, 0.25) == 1.0);
  CHECK(quantile(v, 0.75) == 3.0);
  CHECK(winsorize(v, 0.25, 0.75) == std::vector<double>{1, 1, 2, 3, 3});
  CHECK(winsorize(v, 0.0, 1.0) == v);
  CHECK_THROWS_AS(winsorize(v, 0.8, 0.2), ValidationError);

  std::mt19937_64 rng(1);
  std::normal_distribution<double> n01;
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<double> y(5 + rng() % 200);
    for (auto& x : y) x = n01(rng) * (1 + trial % 7);
    const double lo = 0.01 * static_cast<double>(rng() % 20);
    const double hi = 1.0 - 0.01 * static_cast<double>(rng() % 20);
    const double qlo = quantile(y, lo);
    const double qhi = quantile(y, hi);
    const double scale = 1e-12 * (1 + trial % 7) * 10.0;
    CHECK(std::abs(qlo - oracle::quantile(y, lo)) <= scale);
    CHECK(std::abs(qhi - oracle::quantile(y, hi)) <= scale);
    const auto w = winsorize(y, lo, hi);
    CAPTURE(trial);
    for (std::size_t i = 0; i < y.size(); ++i) {
      CHECK(w[i] >= qlo);
      CHECK(w[i] <= qhi);
      if (y[i] >= qlo && y[i] <= qhi) CHECK(w[i] == y[i]);
    }
    // Idempotent for quantile values fixed once.
    CHECK(clip(w, qlo, qhi) == w);
  }
}

TEST_CASE("feature grouping and stock configs") {
  const auto stock = synthetic::make_stock_data({.rows = 50}, 1);
  const FeatureGroups g = group_features(stock.data);
  CHECK(g.relative.size() == 8);
  CHECK(g.static_numeric.size() == 8);
  CHECK(g.categorical.size() == 1);
  const auto configs = stock_level0_configs(g);
  REQUIRE(configs.size() == 5);
  std::set<std::string> names;
  for (const auto& c : configs) names.insert(c.name);
  CHECK(names.size() == 5);
  CHECK(configs[1].params.extra_trees == false);
  CHECK(configs[0].params.extra_trees);
  CHECK(configs[2].target_transform.kind == TargetTransform::Kind::kWinsorize);
  CHECK(configs[2].target_transform.lo_q == 0.005);
  CHECK(configs[2].target_transform.hi_q == 0.995);
  CHECK(configs[3].feature_set.size() == 8);
  CHECK(configs[4].feature_set.size() == 17);
}

TEST_CASE("level-0 training") {
  const auto stock = synthetic::make_stock_data({.rows = 1200}, 2);
  auto configs = stock_level0_configs(group_features(stock.data));
  const ShotPartition p = partition_shots(stock.data.n_rows(), 200, configs.size(), 4);
  for (std::size_t i = 0; i < configs.size(); ++i) configs[i].shot_indices = p.shots[i];

  const Level0Result r = train_level0(stock.data, configs, p.meta_pool, 2);
  REQUIRE(r.models.size() == 5);
  CHECK(r.meta_features.cols() == 5);
  CHECK(static_cast<std::size_t>(r.meta_features.rows()) == p.meta_pool.size());
  for (const auto& m : r.models) CHECK(m.model.params.objective == Objective::kMse);

  std::vector<double> y;
  for (auto i : p.meta_pool) y.push_back(stock.data.target()[i]);
  double mean = 0.0;
  for (double v : y) mean += v;
  mean /= static_cast<double>(y.size());
  const std::vector<double> constant(y.size(), mean);
  const double baseline = mse(y, constant).value;
  for (Eigen::Index c = 0; c < r.meta_features.cols(); ++c) {
    const Eigen::VectorXd col = r.meta_features.col(c);
    CHECK(mse(y, std::span<const double>(col.data(), y.size())).value <= 1.5 * baseline);
  }

  const Eigen::MatrixXd again = level0_predict(r.models, stock.data.subset(p.meta_pool));
  CHECK(again == r.meta_features);
}

TEST_CASE("level-0 disjointness and error naming") {
  const auto stock = synthetic::make_stock_data({.rows = 200}, 3);
  auto configs = stock_level0_configs(group_features(stock.data));
  configs.resize(2);
  configs[0].shot_indices = {0, 1, 2, 3, 4, 5, 6, 7};
  configs[1].shot_indices = {7, 8, 9, 10, 11, 12, 13, 14};
  std::vector<std::size_t> pool;
  for (std::size_t i = 20; i < 200; ++i) pool.push_back(i);
  CHECK_THROWS_AS(check_disjoint(configs, pool), ValidationError);
  CHECK_THROWS_AS(train_level0(stock.data, configs, pool), ValidationError);

  configs[1].shot_indices = {8, 9, 10, 11, 12, 13, 14, 15};
  CHECK_NOTHROW(check_disjoint(configs, pool));
  pool.push_back(3);
  CHECK_THROWS_AS(check_disjoint(configs, pool), ValidationError);
  pool.pop_back();

  configs[1].feature_set = {999};
  CHECK_THROWS_WITH_AS(train_level0(stock.data, configs, pool),
                       doctest::Contains(configs[1].name.c_str()), ValidationError);
}

TEST_CASE("calibration examples") {
  std::vector<double> s(100);
  for (int i = 0; i < 100; ++i) s[static_cast<std::size_t>(i)] = i + 1;
  const ActionThresholds t = calibrate_thresholds(s, {0.25, 0.5, 0.25});
  CHECK(t.t_low == 25.5);
  CHECK(t.t_high == 75.5);
  const auto c = count_actions(apply_thresholds(t, s));
  CHECK(c == std::array<std::size_t, 3>{25, 50, 25});

  const ActionThresholds hold = calibrate_thresholds(s, {0.0, 1.0, 0.0});
  CHECK(hold.t_low == -kInf);
  CHECK(hold.t_high == kInf);
  CHECK(count_actions(apply_thresholds(hold, s))[1] == 100);

  const std::vector<double> same(40, 0.3);
  const auto tied = apply_thresholds(calibrate_thresholds(same, {0.25, 0.5, 0.25}), same);
  CHECK(count_actions(tied)[1] == 40);

  CHECK(ActionThresholds{}.map(1e300) == Action::kHold);
  CHECK_THROWS_AS(calibrate_thresholds(s, {0.3, 0.3, 0.3}), ValidationError);
  CHECK_THROWS_AS(calibrate_thresholds(s, {-0.1, 1.0, 0.1}), ValidationError);
  CHECK_THROWS_AS(calibrate_thresholds({}, {0.25, 0.5, 0.25}), ValidationError);
}

TEST_CASE("calibration property: exact counts on distinct scores") {
  std::mt19937_64 rng(21);
  std::normal_distribution<double> n01;
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t n = 1 + rng() % 300;
    std::vector<double> s(n);
    for (auto& v : s) v = n01(rng);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    const double sell = u(rng) * 0.5;
    const double buy = u(rng) * (1.0 - sell);
    const ActionDistribution d{sell, 1.0 - sell - buy, buy};
    const auto c = count_actions(apply_thresholds(calibrate_thresholds(s, d), s));
    const double nd = static_cast<double>(n);
    const auto want_sell = static_cast<std::size_t>(std::llround(nd * sell));
    const auto want_buy = std::min(n - want_sell, static_cast<std::size_t>(std::llround(nd * buy)));
    CAPTURE(trial);
    CHECK(c[0] == want_sell);
    CHECK(c[2] == want_buy);
    CHECK(std::abs(static_cast<double>(c[0]) - nd * sell) <= 1.0);
    CHECK(std::abs(static_cast<double>(c[2]) - nd * buy) <= 1.0);
    const double floors[3] = {std::floor(nd * d.sell), std::floor(nd * d.hold), std::floor(nd * d.buy)};
    for (std::size_t a = 0; a < 3; ++a) CHECK(std::abs(static_cast<double>(c[a]) - floors[a]) <= 1.0);
  }
}

TEST_CASE("raising the buy share never raises t_high") {
  std::mt19937_64 rng(22);
  std::normal_distribution<double> n01;
  std::vector<double> s(250);
  for (auto& v : s) v = n01(rng);
  std::size_t prev = 0;
  double prev_high = kInf;
  for (int b = 0; b <= 20; ++b) {
    const double buy = 0.02 * b;
    const ActionThresholds t = calibrate_thresholds(s, {0.2, 0.8 - buy, buy});
    const auto c = count_actions(apply_thresholds(t, s));
    CHECK(t.t_high <= prev_high);
    CHECK(c[2] >= prev);
    prev_high = t.t_high;
    prev = c[2];
  }
}

TEST_CASE("pipeline end to end") {
  const auto train_set = synthetic::make_stock_data({.rows = 1500}, 5);
  const auto held_out = synthetic::make_stock_data({.rows = 600}, 6);
  const auto configs = stock_level0_configs(group_features(train_set.data));
  const StackingFit fit = fit_stacking(train_set.data, configs, quick_options(200));

  CHECK(fit.partition.meta_pool.size() == 1500 - 5 * 200);
  CHECK(fit.meta_scores.size() == fit.partition.meta_pool.size());
  CHECK_NOTHROW(check_disjoint(fit.configs, fit.partition.meta_pool));
  std::set<std::uint64_t> seeds;
  for (const auto& c : fit.configs) seeds.insert(c.params.seed);
  CHECK(seeds.size() == 5);

  const auto meta_counts = count_actions(apply_thresholds(fit.pipeline.thresholds, fit.meta_scores));
  const double pool = static_cast<double>(fit.meta_scores.size());
  CHECK(std::abs(static_cast<double>(meta_counts[0]) - 0.25 * pool) <= 1.0);
  CHECK(std::abs(static_cast<double>(meta_counts[2]) - 0.25 * pool) <= 1.0);

  const auto actions = predict_actions(fit.pipeline, held_out.data);
  REQUIRE(actions.size() == 600);
  const std::vector<int> hold(600, 0);
  CHECK(mean_abs_diff(actions, held_out.actions) <= mean_abs_diff(hold, held_out.actions));

  const auto blended = fit.pipeline.blended_scores(held_out.data);
  const auto& y = held_out.data.target();
  double mean = 0.0;
  for (double v : train_set.data.target()) mean += v;
  mean /= static_cast<double>(train_set.data.n_rows());
  const std::vector<double> constant(y.size(), mean);
  CHECK(mse(y, blended).value <= mse(y, constant).value);

  const StackingPipeline back = StackingPipeline::from_json(nlohmann::json::parse(fit.pipeline.to_json().dump()));
  CHECK(back.blended_scores(held_out.data) == blended);
  CHECK(predict_actions(back, held_out.data) == actions);

  const std::vector<std::size_t> first{0, 1};
  CHECK_THROWS_AS(predict_actions(fit.pipeline, held_out.data.select_features(first)), ValidationError);
}

TEST_CASE("pipeline preconditions") {
  const auto stock = synthetic::make_stock_data({.rows = 100}, 7);
  const auto configs = stock_level0_configs(group_features(stock.data));
  CHECK_THROWS_WITH_AS(fit_stacking(stock.data, configs, quick_options(21)),
                       doctest::Contains("capacity"), ValidationError);
  CHECK_THROWS_AS(fit_stacking(stock.data, configs, quick_options(20)), ValidationError);
  StackingOptions bad = quick_options(5);
  bad.target_distribution = {0.3, 0.3, 0.3};
  CHECK_THROWS_AS(fit_stacking(stock.data, configs, bad), ValidationError);

  testing::TempDir dir("pipe");
  testing::write_file(dir / "p.json", R"({"format": "fewboost-pipeline", "version": 99})");
  CHECK_THROWS_AS(StackingPipeline::load(dir / "p.json"), ValidationError);
}

}  // TEST_SUITE
