#pragma once

#include <cstdint>
#include <string>

#include "json.hpp"

namespace fewboost {

enum class Objective { kBinaryLogloss, kMse, kMae };

// Split score used by the tree learner. kHessian is the second-order score
// G^2/H used for training; kVariance is the count-normalised variance gain
// over raw gradient sums, kept as an independent evaluator.
enum class GainForm { kHessian, kVariance };

std::string to_string(Objective objective);
Objective objective_from_string(const std::string& name);

// Training parameters. Default member values equal the stock LightGBM
// defaults (the "default" preset) with mse objective.
struct Params {
  bool extra_trees = false;
  int num_leaves = 31;
  double eta = 0.1;
  int min_data_in_leaf = 20;
  double feature_fraction = 1.0;
  double bagging_fraction = 1.0;
  int bagging_freq = 0;
  int min_data_per_group = 100;
  double cat_l2 = 10.0;
  double cat_smooth = 10.0;
  int max_cat_to_onehot = 4;
  int min_data_in_bin = 3;
  int max_bin = 255;
  int n_rounds = 100;
  Objective objective = Objective::kMse;
  std::uint64_t seed = 0;
  GainForm gain_form = GainForm::kHessian;

  // Throws ValidationError on out-of-range values.
  void validate() const;

  bool operator==(const Params&) const = default;
};

void to_json(nlohmann::json& j, const Params& p);
// Overlays the keys present in `j` onto `p`; unknown keys are rejected.
void from_json(const nlohmann::json& j, Params& p);

// First and second derivative of the loss with respect to the raw score.
struct GradientPair {
  double grad = 0.0;
  double hess = 0.0;
};

}  // namespace fewboost
