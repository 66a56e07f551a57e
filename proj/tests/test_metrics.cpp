#include <cmath>
#include <random>

#include "doctest.h"
#include "fewboost/error.hpp"
#include "fewboost/metrics.hpp"
#include "oracles.hpp"

using namespace fewboost;

TEST_SUITE("metrics") {

TEST_CASE("auc worked examples") {
  const std::vector<double> y{0, 0, 1, 1};
  CHECK(auc(y, y).value == 1.0);
  const std::vector<double> flat{0.3, 0.3, 0.3, 0.3};
  CHECK(auc(y, flat).value == 0.5);
  const std::vector<double> s{0.1, 0.4, 0.35, 0.8};
  CHECK(auc(y, s).value == 0.75);
  CHECK(auc(y, s).n == 4);
  CHECK(auc(y, s).name == "auc");
}

TEST_CASE("auc preconditions") {
  const std::vector<double> one{1, 1, 1}, s{0.1, 0.2, 0.3};
  CHECK_THROWS_AS(auc(one, s), UndefinedMetricError);
  const std::vector<double> bad{0, 2, 1};
  CHECK_THROWS_AS(auc(bad, s), ValidationError);
  const std::vector<double> short_s{0.1};
  const std::vector<double> y{0, 1};
  CHECK_THROWS_AS(auc(y, short_s), ValidationError);
}

TEST_CASE("auc agrees with pairwise counting, including ties") {
  std::mt19937_64 rng(1);
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t n = 2 + rng() % 199;
    std::vector<double> y(n), s(n);
    const int levels = 1 + static_cast<int>(rng() % 30);
    for (std::size_t i = 0; i < n; ++i) {
      y[i] = static_cast<double>(rng() % 2);
      s[i] = static_cast<double>(rng() % levels) / 7.0;
    }
    y[0] = 0;
    y[1] = 1;
    CHECK(std::abs(auc(y, s).value - oracle::pairwise_auc(y, s)) <= 1e-12);
  }
}

TEST_CASE("auc is rank-only and antisymmetric") {
  std::mt19937_64 rng(2);
  std::normal_distribution<double> n01;
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = 10 + rng() % 50;
    std::vector<double> y(n), s(n), t(n), neg(n);
    for (std::size_t i = 0; i < n; ++i) {
      y[i] = static_cast<double>(i % 2);
      s[i] = std::round(n01(rng) * 4.0) / 4.0;
      t[i] = std::exp(s[i]) * 3.0 - 1.0;
      neg[i] = -s[i];
    }
    const double a = auc(y, s).value;
    CHECK(a >= 0.0);
    CHECK(a <= 1.0);
    CHECK(auc(y, t).value == doctest::Approx(a).epsilon(1e-14));
    CHECK(a + auc(y, neg).value == doctest::Approx(1.0).epsilon(1e-14));
  }
}

TEST_CASE("regression metrics") {
  const std::vector<double> y{0, 1, 2}, zero{0, 0, 0};
  CHECK(mae(y, y).value == 0.0);
  CHECK(mse(y, y).value == 0.0);
  CHECK(r2(y, y).value == 1.0);
  CHECK(mae(y, zero).value == 1.0);
  CHECK(mse(y, zero).value == doctest::Approx(5.0 / 3.0).epsilon(1e-15));
  const std::vector<double> mean{1, 1, 1};
  CHECK(r2(y, mean).value == 0.0);
  CHECK_THROWS_AS(r2(mean, y), UndefinedMetricError);
  const std::vector<double> two{1, 2};
  CHECK_THROWS_AS(mse(y, two), ValidationError);
}

}  // TEST_SUITE
