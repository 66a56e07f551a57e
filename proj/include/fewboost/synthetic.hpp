#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "fewboost/dataset.hpp"

namespace fewboost::synthetic {

struct ClassificationSpec {
  std::size_t rows = 500;
  std::size_t features = 6;
  std::size_t informative = 2;
  double coefficient = 1.0;  // weight of each informative feature in the logit
  double noise_sd = 1.0;
};

// x ~ N(0, 1) per feature; y = 1 iff sum of coefficient * x_j over the
// informative features plus N(0, noise_sd) noise is positive.
Dataset make_classification(const ClassificationSpec& spec, std::uint64_t seed);

struct StockSpec {
  std::size_t rows = 2000;
  std::size_t indicators = 8;  // each yields a relative (dI*) and static (I*) column
  std::size_t groups = 6;      // categorical sector column
  double noise_sd = 0.10;
  double action_band = 0.05;   // |Perform| below this maps to hold
};

// Stock-trend style regression data. Columns: dI1..dIk (relative), I1..Ik
// (static), Group (categorical); target "Perform" mostly driven by the
// relative block. `actions` holds the true sell/hold/buy label (-1/0/+1)
// derived from Perform with the given band.
struct StockData {
  Dataset data;
  std::vector<int> actions;
};

StockData make_stock_data(const StockSpec& spec, std::uint64_t seed);

}  // namespace fewboost::synthetic
