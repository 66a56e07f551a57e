#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "fewboost/dataset.hpp"
#include "fewboost/params.hpp"
#include "fewboost/parallel.hpp"

namespace fewboost {

// Parameter regime for training on a handful of rows: extremely randomized
// thresholds, 4 leaves, eta 0.05, min_data_in_leaf 1, half-feature and
// half-row sampling every round, categorical count/regularisation gates off.
Params fsl_preset();

// Stock LightGBM values for the same parameters.
Params default_preset();

struct NamedPreset {
  std::string name;
  Params params;
};

// Resolves "default" / "fsl"; throws ValidationError otherwise.
NamedPreset preset_by_name(const std::string& name);

struct ShotSample {
  std::vector<std::size_t> indices;  // sorted, unique
  std::size_t k = 0;
  std::uint64_t seed = 0;
  std::vector<double> classes;            // distinct target values, ascending
  std::vector<std::size_t> class_counts;  // parallel to classes
};

// Per-class quotas: floor(k * prior) plus largest-remainder top-up, then
// every class is lifted to at least one row by taking from the largest quota.
std::vector<std::size_t> stratified_quotas(std::span<const std::size_t> class_sizes,
                                           std::size_t k);

// Stratified draw without replacement. ValidationError when k > n_rows or
// k < number of classes.
ShotSample sample_k_shot(const Dataset& ds, std::size_t k, std::uint64_t seed);

struct BenchmarkCell {
  std::size_t shots = 0;
  std::vector<std::optional<double>> auc;  // one per seed; nullopt = failed
  std::vector<std::string> errors;         // parallel to auc; empty if ok
  std::optional<double> mean;
  std::optional<double> sd;
  std::optional<double> median;

  std::size_t successes() const;
  bool failed() const { return successes() == 0; }
  bool partial() const { return successes() != auc.size(); }
};

struct BenchmarkRow {
  std::string preset;
  std::vector<BenchmarkCell> cells;  // parallel to report shots
  std::optional<double> average;     // mean of the cell means
};

struct BenchmarkReport {
  std::string dataset;
  std::vector<std::size_t> shots;
  std::vector<std::uint64_t> seeds;
  std::vector<BenchmarkRow> rows;

  bool has_failures() const;
  nlohmann::json to_json() const;
  // Rows = dataset x preset, columns = shot counts then Average.
  std::string to_table() const;
};

// For every (preset, k, seed): sample k shots, train a binary-logloss model
// on them, score AUC on all remaining rows. Per-cell failures are recorded,
// never thrown.
BenchmarkReport run_benchmark(const Dataset& ds, std::span<const std::size_t> shots,
                              std::span<const std::uint64_t> seeds,
                              std::span<const NamedPreset> presets,
                              const std::string& dataset_name = "dataset",
                              std::size_t threads = thread_count());

}  // namespace fewboost
