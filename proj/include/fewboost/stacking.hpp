#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "fewboost/booster.hpp"
#include "fewboost/dataset.hpp"
#include "fewboost/fsl.hpp"
#include "fewboost/mlp.hpp"
#include "fewboost/params.hpp"
#include "fewboost/parallel.hpp"

namespace fewboost {

// -- Sample partitioning -----------------------------------------------------

struct ShotPartition {
  std::vector<std::vector<std::size_t>> shots;  // one disjoint set per model
  std::vector<std::size_t> meta_pool;           // everything left over
};

// m disjoint uniform-random subsets of size k (each sorted); the leftover
// rows form the meta pool. ValidationError when m * k > n.
ShotPartition partition_shots(std::size_t n, std::size_t k_per_model, std::size_t m_models,
                              std::uint64_t seed);

// -- Target transforms -------------------------------------------------------

// Empirical quantile with linear interpolation between closest ranks:
// h = (n - 1) q, result = x[floor h] + (h - floor h)(x[floor h + 1] - x[floor h]).
double quantile(std::span<const double> values, double q);

std::vector<double> clip(std::span<const double> y, double lo, double hi);

// Clips y to its own [lo_q, hi_q] empirical quantiles.
std::vector<double> winsorize(std::span<const double> y, double lo_q, double hi_q);

struct TargetTransform {
  enum class Kind { kIdentity, kWinsorize };
  Kind kind = Kind::kIdentity;
  double lo_q = 0.0;
  double hi_q = 1.0;

  static TargetTransform identity() { return {}; }
  static TargetTransform winsorized(double lo_q, double hi_q) {
    return {Kind::kWinsorize, lo_q, hi_q};
  }
  std::vector<double> apply(std::span<const double> y) const;
};

// -- Level-0 models ----------------------------------------------------------

struct Level0Config {
  std::string name;
  std::vector<std::size_t> feature_set;
  TargetTransform target_transform;
  Params params;
  std::vector<std::size_t> shot_indices;
};

struct Level0Model {
  std::string name;
  std::vector<std::size_t> feature_set;
  Model model;
};

struct Level0Result {
  std::vector<Level0Model> models;
  Eigen::MatrixXd meta_features;  // meta_pool rows x configs
};

// Throws ValidationError if any two shot sets, or a shot set and the meta
// pool, share a row.
void check_disjoint(std::span<const Level0Config> configs,
                    std::span<const std::size_t> meta_pool);

// Trains each config on its own shots, feature subset and transformed target
// with the mse objective, then predicts the meta pool. Errors name the
// failing config.
Level0Result train_level0(const Dataset& ds, std::span<const Level0Config> configs,
                          std::span<const std::size_t> meta_pool,
                          std::size_t threads = thread_count());

// Level-0 predictions for `rows`, one column per model.
Eigen::MatrixXd level0_predict(std::span<const Level0Model> models, const Dataset& rows);

// Feature groups of a stock-style table: categoricals, numeric columns whose
// name starts with `relative_prefix`, and the remaining numeric columns. When
// nothing matches the prefix every numeric column counts as relative.
struct FeatureGroups {
  std::vector<std::size_t> relative;
  std::vector<std::size_t> static_numeric;
  std::vector<std::size_t> categorical;
};
FeatureGroups group_features(const Dataset& ds, const std::string& relative_prefix = "dI");

// The five level-0 configurations of the stock-trend blend: extra-trees and
// GBDT on the base set (relative + categorical), extra-trees on a
// 0.5%/99.5%-winsorised target, extra-trees without categoricals, and
// extra-trees with the static block added back. Shot sets are left empty;
// extra_trees is overridden per config.
std::vector<Level0Config> stock_level0_configs(const FeatureGroups& groups,
                                               const Params& base = fsl_preset());

// -- Action calibration ------------------------------------------------------

enum class Action : int { kSell = -1, kHold = 0, kBuy = 1 };

struct ActionDistribution {
  double sell = 0.0;
  double hold = 1.0;
  double buy = 0.0;

  // ValidationError unless all parts are in [0, 1] and sum to 1 within 1e-9.
  void validate() const;
};

// score < t_low -> sell, score > t_high -> buy, otherwise hold.
struct ActionThresholds {
  double t_low = -std::numeric_limits<double>::infinity();
  double t_high = std::numeric_limits<double>::infinity();

  Action map(double score) const {
    if (score < t_low) return Action::kSell;
    if (score > t_high) return Action::kBuy;
    return Action::kHold;
  }
};

// Cut points placed so the calibration scores reproduce the target mix:
// with s sorted, n_sell = round(n * sell) and n_buy = round(n * buy), t_low is
// the midpoint of s[n_sell - 1] and s[n_sell] and t_high the midpoint of
// s[n - n_buy - 1] and s[n - n_buy]; empty classes get infinite sentinels.
// Tied scores at a cut collapse into hold.
ActionThresholds calibrate_thresholds(std::span<const double> scores,
                                      const ActionDistribution& target);

std::vector<int> apply_thresholds(const ActionThresholds& t, std::span<const double> scores);

// -- Pipeline ----------------------------------------------------------------

struct StackingPipeline {
  std::vector<Level0Model> level0;
  Mlp mlp;
  ActionThresholds thresholds;
  ActionDistribution target_distribution;
  std::vector<FeatureSpec> features;  // layout of the input table
  std::string target_name = "target";

  std::vector<double> blended_scores(const Dataset& rows) const;

  nlohmann::json to_json() const;
  static StackingPipeline from_json(const nlohmann::json& j);
  void save(const std::filesystem::path& path) const;
  static StackingPipeline load(const std::filesystem::path& path);
};

// Level-0 predictions -> MLP -> thresholds, encoded -1/0/+1.
std::vector<int> predict_actions(const StackingPipeline& pipeline, const Dataset& rows);

struct StackingOptions {
  std::size_t k_per_model = 300;
  std::uint64_t seed = 0;
  ActionDistribution target_distribution{0.25, 0.50, 0.25};
  MlpTrainOptions mlp;
  std::size_t threads = thread_count();
};

struct StackingFit {
  StackingPipeline pipeline;
  ShotPartition partition;
  std::vector<Level0Config> configs;  // with their assigned shots
  std::vector<double> meta_scores;    // blended scores on the meta pool
  MlpFit mlp_fit;
};

// partition -> level-0 training -> MLP on the meta pool -> thresholds
// calibrated on the meta-pool blended scores. Config i trains with seed
// derived from (options.seed, i); its shot set is config i's partition.
StackingFit fit_stacking(const Dataset& ds, std::vector<Level0Config> configs,
                         const StackingOptions& options);

}  // namespace fewboost
