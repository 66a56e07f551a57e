#pragma once

#include <cstddef>
#include <span>
#include <string>

namespace fewboost {

struct MetricValue {
  std::string name;
  double value = 0.0;
  std::size_t n = 0;  // rows evaluated (positive-negative pairs for auc)
};

// Probability that a random positive outscores a random negative, ties
// counted as one half (Mann-Whitney U with midranks). Labels must be 0/1
// with both classes present, otherwise UndefinedMetricError.
MetricValue auc(std::span<const double> labels, std::span<const double> scores);

MetricValue mae(std::span<const double> y, std::span<const double> yhat);
MetricValue mse(std::span<const double> y, std::span<const double> yhat);
// 1 - SSE/SST; UndefinedMetricError when y is constant.
MetricValue r2(std::span<const double> y, std::span<const double> yhat);

}  // namespace fewboost
