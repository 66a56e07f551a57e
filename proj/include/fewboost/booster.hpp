#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "fewboost/dataset.hpp"
#include "fewboost/params.hpp"
#include "fewboost/tree.hpp"

namespace fewboost {

inline constexpr int kModelFormatVersion = 1;

double sigmoid(double x);

// Derivatives of the loss at the current raw scores:
//   binary logloss: grad = p - y, hess = p(1 - p), p = sigmoid(score)
//   mse:            grad = score - y, hess = 1
//   mae:            grad = sign(score - y), hess = 1
std::vector<GradientPair> compute_gradients(Objective objective,
                                            std::span<const double> targets,
                                            std::span<const double> scores);

// Mean target for mse/mae, log-odds of the positive rate (clamped to +-10)
// for binary logloss.
double initial_score(Objective objective, std::span<const double> targets);

// Throws ValidationError if the targets do not suit the objective.
void validate_targets(Objective objective, std::span<const double> targets);

// Boosted ensemble. Raw score = base_score + eta * sum of tree outputs,
// passed through the objective's link (sigmoid for binary logloss).
struct Model {
  std::vector<Tree> trees;
  double base_score = 0.0;
  Params params;
  std::vector<FeatureSpec> features;
  std::vector<FeatureBinning> binnings;
  std::string target_name = "target";

  Objective objective() const { return params.objective; }
  std::size_t n_features() const { return binnings.size(); }

  double predict_raw(std::span<const double> row) const;
  double predict(std::span<const double> row) const;
  std::vector<double> predict(const Dataset& rows) const;

  nlohmann::json to_json() const;
  static Model from_json(const nlohmann::json& j);
  void save(const std::filesystem::path& path) const;
  static Model load(const std::filesystem::path& path);
};

// Runs params.n_rounds boosting iterations over `bds`.
Model train(const BinnedDataset& bds, const Params& params);

// Bins `ds` with the params' binning settings, then trains.
Model train(const Dataset& ds, const Params& params);

}  // namespace fewboost
