#include "fewboost/synthetic.hpp"

#include <cmath>
#include <random>
#include <string>

#include "fewboost/error.hpp"

namespace fewboost::synthetic {

Dataset make_classification(const ClassificationSpec& spec, std::uint64_t seed) {
  if (spec.informative > spec.features) {
    throw ValidationError("more informative features than features");
  }
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> standard(0.0, 1.0);
  std::normal_distribution<double> noise(0.0, spec.noise_sd);

  std::vector<FeatureColumn> columns(spec.features);
  for (std::size_t j = 0; j < spec.features; ++j) {
    columns[j].spec = {"x" + std::to_string(j + 1), FeatureKind::kNumeric, {}};
    columns[j].values.resize(spec.rows);
  }
  std::vector<double> target(spec.rows);
  for (std::size_t r = 0; r < spec.rows; ++r) {
    double logit = 0.0;
    for (std::size_t j = 0; j < spec.features; ++j) {
      const double x = standard(rng);
      columns[j].values[r] = x;
      if (j < spec.informative) logit += spec.coefficient * x;
    }
    target[r] = logit + noise(rng) > 0.0 ? 1.0 : 0.0;
  }
  return Dataset(std::move(columns), std::move(target), "y");
}

StockData make_stock_data(const StockSpec& spec, std::uint64_t seed) {
  if (spec.indicators < 4) throw ValidationError("stock data needs at least 4 indicators");
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> standard(0.0, 1.0);
  std::normal_distribution<double> noise(0.0, spec.noise_sd);
  std::uniform_int_distribution<std::size_t> group(0, spec.groups - 1);

  const std::size_t k = spec.indicators;
  std::vector<FeatureColumn> columns;
  for (std::size_t i = 0; i < k; ++i) {
    columns.push_back({{"dI" + std::to_string(i + 1), FeatureKind::kNumeric, {}}, {}});
  }
  for (std::size_t i = 0; i < k; ++i) {
    columns.push_back({{"I" + std::to_string(i + 1), FeatureKind::kNumeric, {}}, {}});
  }
  FeatureColumn sector{{"Group", FeatureKind::kCategorical, {}}, {}};
  for (std::size_t g = 0; g < spec.groups; ++g) sector.spec.categories.push_back("G" + std::to_string(g));

  std::vector<double> sector_effect(spec.groups);
  for (auto& e : sector_effect) e = 0.02 * standard(rng);

  StockData out;
  std::vector<double> perform(spec.rows);
  out.actions.resize(spec.rows);
  for (std::size_t r = 0; r < spec.rows; ++r) {
    std::vector<double> level(k), change(k);
    for (std::size_t i = 0; i < k; ++i) {
      level[i] = standard(rng);
      change[i] = 0.5 * level[i] + standard(rng);
    }
    const std::size_t g = group(rng);
    for (std::size_t i = 0; i < k; ++i) {
      columns[i].values.push_back(change[i]);
      columns[k + i].values.push_back(level[i]);
    }
    sector.values.push_back(static_cast<double>(g));

    const double signal = 0.06 * std::tanh(change[0]) - 0.04 * change[1] +
                          0.03 * change[2] * (change[3] > 0.0 ? 1.0 : -1.0) +
                          0.01 * level[0] + sector_effect[g];
    perform[r] = signal + noise(rng);
    out.actions[r] = perform[r] > spec.action_band ? 1 : (perform[r] < -spec.action_band ? -1 : 0);
  }
  columns.push_back(std::move(sector));
  out.data = Dataset(std::move(columns), std::move(perform), "Perform");
  return out;
}

}  // namespace fewboost::synthetic
