#include "fewboost/fsl.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <map>
#include <numeric>
#include <random>
#include <sstream>

#include "fewboost/booster.hpp"
#include "fewboost/error.hpp"
#include "fewboost/metrics.hpp"

namespace fewboost {

Params fsl_preset() {
  Params p;
  p.extra_trees = true;
  p.num_leaves = 4;
  p.eta = 0.05;
  p.min_data_in_leaf = 1;
  p.feature_fraction = 0.5;
  p.bagging_fraction = 0.5;
  p.bagging_freq = 1;
  p.min_data_per_group = 1;
  p.cat_l2 = 0.0;
  p.cat_smooth = 0.0;
  p.max_cat_to_onehot = 100;
  p.min_data_in_bin = 3;
  return p;
}

Params default_preset() {
  Params p;
  p.extra_trees = false;
  p.num_leaves = 31;
  p.eta = 0.1;
  p.min_data_in_leaf = 20;
  p.feature_fraction = 1.0;
  p.bagging_fraction = 1.0;
  p.bagging_freq = 0;
  p.min_data_per_group = 100;
  p.cat_l2 = 10.0;
  p.cat_smooth = 10.0;
  p.max_cat_to_onehot = 4;
  p.min_data_in_bin = 3;
  return p;
}

NamedPreset preset_by_name(const std::string& name) {
  if (name == "fsl") return {name, fsl_preset()};
  if (name == "default") return {name, default_preset()};
  throw ValidationError("unknown preset '" + name + "' (expected default or fsl)");
}

std::vector<std::size_t> stratified_quotas(std::span<const std::size_t> class_sizes,
                                           std::size_t k) {
  const std::size_t n = std::accumulate(class_sizes.begin(), class_sizes.end(), std::size_t{0});
  const std::size_t c = class_sizes.size();
  if (k > n) throw ValidationError("k exceeds the number of rows");
  if (k < c) throw ValidationError("k is smaller than the number of classes");

  std::vector<std::size_t> quota(c);
  std::vector<double> remainder(c);
  std::size_t assigned = 0;
  for (std::size_t i = 0; i < c; ++i) {
    const double exact =
        static_cast<double>(k) * static_cast<double>(class_sizes[i]) / static_cast<double>(n);
    quota[i] = static_cast<std::size_t>(std::floor(exact));
    remainder[i] = exact - static_cast<double>(quota[i]);
    assigned += quota[i];
  }
  std::vector<std::size_t> by_remainder(c);
  std::iota(by_remainder.begin(), by_remainder.end(), 0);
  std::stable_sort(by_remainder.begin(), by_remainder.end(),
                   [&](std::size_t a, std::size_t b) { return remainder[a] > remainder[b]; });
  for (std::size_t i = 0; assigned < k; ++i) {
    const std::size_t cls = by_remainder[i % c];
    if (quota[cls] < class_sizes[cls]) {
      ++quota[cls];
      ++assigned;
    }
  }
  for (std::size_t cls = 0; cls < c; ++cls) {
    if (quota[cls] > 0 || class_sizes[cls] == 0) continue;
    const auto donor = static_cast<std::size_t>(
        std::max_element(quota.begin(), quota.end()) - quota.begin());
    --quota[donor];
    quota[cls] = 1;
  }
  return quota;
}

ShotSample sample_k_shot(const Dataset& ds, std::size_t k, std::uint64_t seed) {
  if (!ds.has_target()) throw ValidationError("dataset has no target");
  if (k > ds.n_rows()) {
    throw ValidationError("k=" + std::to_string(k) + " exceeds " +
                          std::to_string(ds.n_rows()) + " rows");
  }
  std::map<double, std::vector<std::size_t>> by_class;
  for (std::size_t r = 0; r < ds.n_rows(); ++r) {
    const double y = ds.target()[r];
    if (!std::isfinite(y)) throw ValidationError("target has missing values");
    by_class[y].push_back(r);
  }
  ShotSample sample;
  sample.k = k;
  sample.seed = seed;
  std::vector<std::size_t> sizes;
  for (const auto& [cls, rows] : by_class) {
    sample.classes.push_back(cls);
    sizes.push_back(rows.size());
  }
  if (k < sizes.size()) {
    throw ValidationError("k=" + std::to_string(k) + " is below the class count " +
                          std::to_string(sizes.size()));
  }
  sample.class_counts = stratified_quotas(sizes, k);

  Rng rng(seed);
  std::size_t c = 0;
  for (auto& [cls, rows] : by_class) {
    std::shuffle(rows.begin(), rows.end(), rng);
    sample.indices.insert(sample.indices.end(), rows.begin(),
                          rows.begin() + static_cast<std::ptrdiff_t>(sample.class_counts[c]));
    ++c;
  }
  std::sort(sample.indices.begin(), sample.indices.end());
  return sample;
}

// -- Benchmark ---------------------------------------------------------------

std::size_t BenchmarkCell::successes() const {
  return static_cast<std::size_t>(
      std::count_if(auc.begin(), auc.end(), [](const auto& a) { return a.has_value(); }));
}

bool BenchmarkReport::has_failures() const {
  for (const auto& row : rows) {
    for (const auto& cell : row.cells) {
      if (cell.partial()) return true;
    }
  }
  return false;
}

namespace {

nlohmann::json optional_json(const std::optional<double>& v) {
  return v ? nlohmann::json(*v) : nlohmann::json(nullptr);
}

void summarize(BenchmarkCell& cell) {
  std::vector<double> ok;
  for (const auto& a : cell.auc) {
    if (a) ok.push_back(*a);
  }
  if (ok.empty()) return;
  const double n = static_cast<double>(ok.size());
  const double mean = std::accumulate(ok.begin(), ok.end(), 0.0) / n;
  double ss = 0.0;
  for (double v : ok) ss += (v - mean) * (v - mean);
  cell.mean = mean;
  cell.sd = ok.size() > 1 ? std::sqrt(ss / (n - 1.0)) : 0.0;
  std::sort(ok.begin(), ok.end());
  const std::size_t m = ok.size() / 2;
  cell.median = ok.size() % 2 == 1 ? ok[m] : (ok[m - 1] + ok[m]) / 2.0;
}

double run_cell(const Dataset& ds, std::size_t k, std::uint64_t seed, Params params) {
  params.objective = Objective::kBinaryLogloss;
  params.seed = seed;
  const ShotSample shot = sample_k_shot(ds, k, seed);
  std::vector<std::size_t> eval;
  eval.reserve(ds.n_rows() - shot.indices.size());
  std::size_t next = 0;
  for (std::size_t r = 0; r < ds.n_rows(); ++r) {
    if (next < shot.indices.size() && shot.indices[next] == r) {
      ++next;
    } else {
      eval.push_back(r);
    }
  }
  const Model model = train(ds.subset(shot.indices), params);
  const Dataset eval_ds = ds.subset(eval);
  const auto scores = model.predict(eval_ds);
  return auc(eval_ds.target(), scores).value;
}

}  // namespace

BenchmarkReport run_benchmark(const Dataset& ds, std::span<const std::size_t> shots,
                              std::span<const std::uint64_t> seeds,
                              std::span<const NamedPreset> presets,
                              const std::string& dataset_name, std::size_t threads) {
  if (shots.empty()) throw ValidationError("benchmark needs at least one shot count");
  if (seeds.empty()) throw ValidationError("benchmark needs at least one seed");
  if (presets.empty()) throw ValidationError("benchmark needs at least one preset");

  BenchmarkReport report;
  report.dataset = dataset_name;
  report.shots.assign(shots.begin(), shots.end());
  report.seeds.assign(seeds.begin(), seeds.end());
  for (const auto& preset : presets) {
    BenchmarkRow row;
    row.preset = preset.name;
    for (auto k : shots) {
      BenchmarkCell cell;
      cell.shots = k;
      cell.auc.resize(seeds.size());
      cell.errors.resize(seeds.size());
      row.cells.push_back(std::move(cell));
    }
    report.rows.push_back(std::move(row));
  }

  const std::size_t per_preset = shots.size() * seeds.size();
  parallel_for(
      presets.size() * per_preset,
      [&](std::size_t task) {
        const std::size_t p = task / per_preset;
        const std::size_t s = (task % per_preset) / seeds.size();
        const std::size_t z = task % seeds.size();
        BenchmarkCell& cell = report.rows[p].cells[s];
        try {
          cell.auc[z] = run_cell(ds, shots[s], seeds[z], presets[p].params);
        } catch (const std::exception& e) {
          cell.errors[z] = e.what();
        }
      },
      threads);

  for (auto& row : report.rows) {
    double sum = 0.0;
    bool complete = true;
    for (auto& cell : row.cells) {
      summarize(cell);
      if (cell.mean) {
        sum += *cell.mean;
      } else {
        complete = false;
      }
    }
    if (complete) row.average = sum / static_cast<double>(row.cells.size());
  }
  return report;
}

nlohmann::json BenchmarkReport::to_json() const {
  nlohmann::json rows_json = nlohmann::json::array();
  for (const auto& row : rows) {
    nlohmann::json cells = nlohmann::json::array();
    for (const auto& cell : row.cells) {
      nlohmann::json aucs = nlohmann::json::array();
      nlohmann::json errors = nlohmann::json::array();
      for (std::size_t z = 0; z < cell.auc.size(); ++z) {
        aucs.push_back(optional_json(cell.auc[z]));
        if (!cell.errors[z].empty()) {
          errors.push_back({{"seed", seeds[z]}, {"error", cell.errors[z]}});
        }
      }
      cells.push_back({{"shots", cell.shots},
                       {"auc", std::move(aucs)},
                       {"mean", optional_json(cell.mean)},
                       {"sd", optional_json(cell.sd)},
                       {"median", optional_json(cell.median)},
                       {"failed", cell.failed()},
                       {"errors", std::move(errors)}});
    }
    rows_json.push_back({{"dataset", dataset},
                         {"preset", row.preset},
                         {"cells", std::move(cells)},
                         {"average", optional_json(row.average)}});
  }
  return {{"format", "fewboost-benchmark"},
          {"version", 1},
          {"metric", "auc"},
          {"dataset", dataset},
          {"shots", shots},
          {"seeds", seeds},
          {"rows", std::move(rows_json)}};
}

std::string BenchmarkReport::to_table() const {
  std::size_t name_width = std::string("Dataset").size();
  std::size_t method_width = std::string("Method").size();
  name_width = std::max(name_width, dataset.size());
  for (const auto& row : rows) method_width = std::max(method_width, row.preset.size());

  std::ostringstream out;
  out << std::left << std::setw(static_cast<int>(name_width)) << "Dataset" << "  "
      << std::setw(static_cast<int>(method_width)) << "Method";
  for (auto k : shots) out << "  " << std::right << std::setw(8) << (std::to_string(k) + "-shot");
  out << "  " << std::setw(8) << "Average" << '\n';

  out << std::fixed;
  for (const auto& row : rows) {
    out << std::left << std::setw(static_cast<int>(name_width)) << dataset << "  "
        << std::setw(static_cast<int>(method_width)) << row.preset << std::right;
    for (const auto& cell : row.cells) {
      out << "  " << std::setw(8);
      if (cell.mean) {
        out << std::setprecision(2) << *cell.mean;
      } else {
        out << "fail";
      }
    }
    out << "  " << std::setw(8);
    if (row.average) {
      out << std::setprecision(3) << *row.average;
    } else {
      out << "-";
    }
    out << '\n';
  }
  return out.str();
}

}  // namespace fewboost
