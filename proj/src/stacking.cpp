#include "fewboost/stacking.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>
#include <unordered_set>

#include "fewboost/error.hpp"

namespace fewboost {

namespace {

constexpr const char* kPipelineFormat = "fewboost-pipeline";
constexpr int kPipelineVersion = 1;

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream) {
  // splitmix64 finaliser
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

nlohmann::json encode_bound(double v) {
  if (std::isinf(v)) return v < 0 ? "-inf" : "inf";
  return v;
}

double decode_bound(const nlohmann::json& j) {
  if (j.is_string()) {
    const auto s = j.get<std::string>();
    if (s == "-inf") return -std::numeric_limits<double>::infinity();
    if (s == "inf") return std::numeric_limits<double>::infinity();
    throw ValidationError("bad threshold value '" + s + "'");
  }
  return j.get<double>();
}

Dataset project(const Dataset& ds, const std::vector<std::size_t>& features) {
  for (auto f : features) {
    if (f >= ds.n_features()) {
      throw ValidationError("feature index " + std::to_string(f) + " out of range");
    }
  }
  return ds.select_features(features);
}

}  // namespace

// -- Sample partitioning -----------------------------------------------------

ShotPartition partition_shots(std::size_t n, std::size_t k_per_model, std::size_t m_models,
                              std::uint64_t seed) {
  if (k_per_model == 0) throw ValidationError("k_per_model must be positive");
  if (m_models != 0 && k_per_model > n / m_models) {
    throw ValidationError("partition capacity exceeded: " + std::to_string(m_models) + " x " +
                          std::to_string(k_per_model) + " shots needs more than " +
                          std::to_string(n) + " rows");
  }
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 rng(seed);
  std::shuffle(order.begin(), order.end(), rng);

  ShotPartition out;
  auto it = order.begin();
  for (std::size_t m = 0; m < m_models; ++m) {
    std::vector<std::size_t> shot(it, it + static_cast<std::ptrdiff_t>(k_per_model));
    std::sort(shot.begin(), shot.end());
    out.shots.push_back(std::move(shot));
    it += static_cast<std::ptrdiff_t>(k_per_model);
  }
  out.meta_pool.assign(it, order.end());
  std::sort(out.meta_pool.begin(), out.meta_pool.end());
  return out;
}

// -- Target transforms -------------------------------------------------------

double quantile(std::span<const double> values, double q) {
  if (values.empty()) throw ValidationError("quantile of an empty vector");
  if (!(q >= 0.0 && q <= 1.0)) throw ValidationError("quantile level outside [0, 1]");
  std::vector<double> s(values.begin(), values.end());
  std::sort(s.begin(), s.end());
  const double h = static_cast<double>(s.size() - 1) * q;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  if (lo + 1 >= s.size()) return s.back();
  return s[lo] + (h - static_cast<double>(lo)) * (s[lo + 1] - s[lo]);
}

std::vector<double> clip(std::span<const double> y, double lo, double hi) {
  std::vector<double> out(y.size());
  std::transform(y.begin(), y.end(), out.begin(),
                 [&](double v) { return std::clamp(v, lo, hi); });
  return out;
}

std::vector<double> winsorize(std::span<const double> y, double lo_q, double hi_q) {
  if (!(lo_q >= 0.0 && lo_q < hi_q && hi_q <= 1.0)) {
    throw ValidationError("winsorize needs 0 <= lo_q < hi_q <= 1");
  }
  if (y.empty()) return {};
  return clip(y, quantile(y, lo_q), quantile(y, hi_q));
}

std::vector<double> TargetTransform::apply(std::span<const double> y) const {
  if (kind == Kind::kWinsorize) return winsorize(y, lo_q, hi_q);
  return {y.begin(), y.end()};
}

// -- Level-0 models ----------------------------------------------------------

void check_disjoint(std::span<const Level0Config> configs,
                    std::span<const std::size_t> meta_pool) {
  std::unordered_set<std::size_t> seen;
  for (const auto& c : configs) {
    for (auto r : c.shot_indices) {
      if (!seen.insert(r).second) {
        throw ValidationError("config '" + c.name + "': row " + std::to_string(r) +
                              " is shared with another shot set");
      }
    }
  }
  for (auto r : meta_pool) {
    if (seen.count(r)) {
      throw ValidationError("row " + std::to_string(r) + " is in both a shot set and the meta pool");
    }
  }
}

Level0Result train_level0(const Dataset& ds, std::span<const Level0Config> configs,
                          std::span<const std::size_t> meta_pool, std::size_t threads) {
  if (!ds.has_target()) throw ValidationError("level-0 training needs a target column");
  if (meta_pool.empty()) throw ValidationError("meta pool is empty");
  for (auto r : meta_pool) {
    if (r >= ds.n_rows()) throw ValidationError("meta pool row out of range");
  }
  check_disjoint(configs, meta_pool);

  Level0Result out;
  out.models.resize(configs.size());
  out.meta_features.resize(static_cast<Eigen::Index>(meta_pool.size()),
                           static_cast<Eigen::Index>(configs.size()));
  const Dataset meta = ds.subset(meta_pool);

  parallel_for(configs.size(), [&](std::size_t i) {
    const auto& c = configs[i];
    try {
      if (c.shot_indices.empty()) throw ValidationError("empty shot set");
      if (c.feature_set.empty()) throw ValidationError("empty feature set");
      for (auto r : c.shot_indices) {
        if (r >= ds.n_rows()) throw ValidationError("shot row out of range");
      }
      Params params = c.params;
      params.objective = Objective::kMse;
      const Dataset shots = project(ds.subset(c.shot_indices), c.feature_set);
      const Dataset train_set = shots.with_target(c.target_transform.apply(shots.target()));
      Model model = train(train_set, params);
      const auto pred = model.predict(project(meta, c.feature_set));
      for (std::size_t r = 0; r < pred.size(); ++r) {
        out.meta_features(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(i)) = pred[r];
      }
      out.models[i] = {c.name, c.feature_set, std::move(model)};
    } catch (const Error& e) {
      throw ValidationError("level-0 config '" + c.name + "': " + e.what());
    }
  }, threads);
  return out;
}

Eigen::MatrixXd level0_predict(std::span<const Level0Model> models, const Dataset& rows) {
  Eigen::MatrixXd out(static_cast<Eigen::Index>(rows.n_rows()),
                      static_cast<Eigen::Index>(models.size()));
  for (std::size_t i = 0; i < models.size(); ++i) {
    const auto pred = models[i].model.predict(project(rows, models[i].feature_set));
    for (std::size_t r = 0; r < pred.size(); ++r) {
      out(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(i)) = pred[r];
    }
  }
  return out;
}

FeatureGroups group_features(const Dataset& ds, const std::string& relative_prefix) {
  FeatureGroups g;
  std::vector<std::size_t> numeric;
  for (std::size_t f = 0; f < ds.n_features(); ++f) {
    const auto& spec = ds.column(f).spec;
    if (spec.kind == FeatureKind::kCategorical) {
      g.categorical.push_back(f);
    } else if (spec.name.starts_with(relative_prefix)) {
      g.relative.push_back(f);
    } else {
      numeric.push_back(f);
    }
  }
  if (g.relative.empty()) {
    g.relative = std::move(numeric);
  } else {
    g.static_numeric = std::move(numeric);
  }
  return g;
}

std::vector<Level0Config> stock_level0_configs(const FeatureGroups& groups, const Params& base) {
  auto join = [](std::initializer_list<const std::vector<std::size_t>*> parts) {
    std::vector<std::size_t> out;
    for (const auto* p : parts) out.insert(out.end(), p->begin(), p->end());
    std::sort(out.begin(), out.end());
    return out;
  };
  const auto base_set = join({&groups.relative, &groups.categorical});
  const auto with_static = join({&groups.relative, &groups.static_numeric, &groups.categorical});

  Params et = base;
  et.extra_trees = true;
  Params gbdt = base;
  gbdt.extra_trees = false;

  return {
      {"extra_trees_base", base_set, TargetTransform::identity(), et, {}},
      {"gbdt_base", base_set, TargetTransform::identity(), gbdt, {}},
      {"extra_trees_winsorized", base_set, TargetTransform::winsorized(0.005, 0.995), et, {}},
      {"extra_trees_no_categorical", join({&groups.relative}), TargetTransform::identity(), et, {}},
      {"extra_trees_with_static", with_static, TargetTransform::identity(), et, {}},
  };
}

// -- Action calibration ------------------------------------------------------

void ActionDistribution::validate() const {
  for (double p : {sell, hold, buy}) {
    if (!(p >= 0.0 && p <= 1.0)) throw ValidationError("action probabilities must lie in [0, 1]");
  }
  if (std::abs(sell + hold + buy - 1.0) > 1e-9) {
    throw ValidationError("action distribution sums to " + std::to_string(sell + hold + buy) +
                          ", expected 1");
  }
}

ActionThresholds calibrate_thresholds(std::span<const double> scores,
                                      const ActionDistribution& target) {
  target.validate();
  if (scores.empty()) throw ValidationError("cannot calibrate on an empty score vector");
  std::vector<double> s(scores.begin(), scores.end());
  if (std::any_of(s.begin(), s.end(), [](double v) { return std::isnan(v); })) {
    throw ValidationError("scores contain NaN");
  }
  std::sort(s.begin(), s.end());
  const std::size_t n = s.size();
  const double nd = static_cast<double>(n);
  const auto n_sell = std::min(n, static_cast<std::size_t>(std::llround(nd * target.sell)));
  const auto n_buy = std::min(n - n_sell, static_cast<std::size_t>(std::llround(nd * target.buy)));

  constexpr double kInf = std::numeric_limits<double>::infinity();
  ActionThresholds t;
  if (n_sell == 0) {
    t.t_low = -kInf;
  } else if (n_sell == n) {
    t.t_low = kInf;
  } else {
    t.t_low = 0.5 * (s[n_sell - 1] + s[n_sell]);
  }
  if (n_buy == 0) {
    t.t_high = kInf;
  } else if (n_buy == n) {
    t.t_high = -kInf;
  } else {
    t.t_high = 0.5 * (s[n - n_buy - 1] + s[n - n_buy]);
  }
  return t;
}

std::vector<int> apply_thresholds(const ActionThresholds& t, std::span<const double> scores) {
  std::vector<int> out(scores.size());
  std::transform(scores.begin(), scores.end(), out.begin(),
                 [&](double v) { return static_cast<int>(t.map(v)); });
  return out;
}

// -- Pipeline ----------------------------------------------------------------

std::vector<double> StackingPipeline::blended_scores(const Dataset& rows) const {
  if (rows.n_features() != features.size()) {
    throw ValidationError("dataset has " + std::to_string(rows.n_features()) +
                          " features, pipeline expects " + std::to_string(features.size()));
  }
  const Eigen::MatrixXd meta = level0_predict(level0, rows);
  if (meta.cols() != mlp.input_dim()) {
    throw ValidationError("meta-learner expects " + std::to_string(mlp.input_dim()) + " inputs");
  }
  const Eigen::VectorXd y = mlp.predict(meta);
  return {y.data(), y.data() + y.size()};
}

nlohmann::json StackingPipeline::to_json() const {
  nlohmann::json models = nlohmann::json::array();
  for (const auto& m : level0) {
    models.push_back({{"name", m.name}, {"feature_set", m.feature_set}, {"model", m.model.to_json()}});
  }
  return nlohmann::json{
      {"format", kPipelineFormat},
      {"version", kPipelineVersion},
      {"target_name", target_name},
      {"features", features},
      {"level0", std::move(models)},
      {"mlp", mlp.to_json()},
      {"thresholds", {{"t_low", encode_bound(thresholds.t_low)}, {"t_high", encode_bound(thresholds.t_high)}}},
      {"target_distribution",
       {{"sell", target_distribution.sell}, {"hold", target_distribution.hold}, {"buy", target_distribution.buy}}},
  };
}

StackingPipeline StackingPipeline::from_json(const nlohmann::json& j) {
  try {
    if (j.at("format").get<std::string>() != kPipelineFormat) {
      throw ValidationError("not a fewboost pipeline document");
    }
    if (j.at("version").get<int>() != kPipelineVersion) {
      throw ValidationError("unsupported pipeline version " + j.at("version").dump());
    }
    StackingPipeline p;
    p.target_name = j.at("target_name").get<std::string>();
    p.features = j.at("features").get<std::vector<FeatureSpec>>();
    for (const auto& mj : j.at("level0")) {
      Level0Model m{mj.at("name").get<std::string>(),
                    mj.at("feature_set").get<std::vector<std::size_t>>(),
                    Model::from_json(mj.at("model"))};
      if (m.feature_set.size() != m.model.n_features()) {
        throw ValidationError("level-0 model '" + m.name + "' feature set does not match its model");
      }
      for (auto f : m.feature_set) {
        if (f >= p.features.size()) throw ValidationError("level-0 feature index out of range");
      }
      p.level0.push_back(std::move(m));
    }
    p.mlp = Mlp::from_json(j.at("mlp"));
    if (static_cast<std::size_t>(p.mlp.input_dim()) != p.level0.size()) {
      throw ValidationError("meta-learner input size does not match the level-0 count");
    }
    const auto& t = j.at("thresholds");
    p.thresholds = {decode_bound(t.at("t_low")), decode_bound(t.at("t_high"))};
    const auto& d = j.at("target_distribution");
    p.target_distribution = {d.at("sell").get<double>(), d.at("hold").get<double>(),
                             d.at("buy").get<double>()};
    return p;
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("malformed pipeline document: ") + e.what());
  }
}

void StackingPipeline::save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  out << to_json().dump(1) << '\n';
}

StackingPipeline StackingPipeline::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open pipeline file: " + path.string());
  try {
    return from_json(nlohmann::json::parse(in));
  } catch (const nlohmann::json::parse_error& e) {
    throw ValidationError("invalid pipeline JSON in " + path.string() + ": " + e.what());
  }
}

std::vector<int> predict_actions(const StackingPipeline& pipeline, const Dataset& rows) {
  return apply_thresholds(pipeline.thresholds, pipeline.blended_scores(rows));
}

StackingFit fit_stacking(const Dataset& ds, std::vector<Level0Config> configs,
                         const StackingOptions& options) {
  options.target_distribution.validate();
  if (configs.empty()) throw ValidationError("stacking needs at least one level-0 config");
  if (!ds.has_target()) throw ValidationError("stacking needs a target column");

  StackingFit fit;
  fit.partition = partition_shots(ds.n_rows(), options.k_per_model, configs.size(), options.seed);
  if (fit.partition.meta_pool.empty()) {
    throw ValidationError("partition leaves no rows for meta-training");
  }
  for (std::size_t i = 0; i < configs.size(); ++i) {
    configs[i].shot_indices = fit.partition.shots[i];
    configs[i].params.seed = mix_seed(options.seed, i);
  }

  auto level0 = train_level0(ds, configs, fit.partition.meta_pool, options.threads);
  std::vector<double> meta_targets;
  meta_targets.reserve(fit.partition.meta_pool.size());
  for (auto r : fit.partition.meta_pool) meta_targets.push_back(ds.target()[r]);

  fit.mlp_fit = train_mlp(level0.meta_features, meta_targets, mix_seed(options.seed, configs.size()),
                          options.mlp);
  const Eigen::VectorXd scores = fit.mlp_fit.mlp.predict(level0.meta_features);
  fit.meta_scores.assign(scores.data(), scores.data() + scores.size());

  fit.pipeline.level0 = std::move(level0.models);
  fit.pipeline.mlp = fit.mlp_fit.mlp;
  fit.pipeline.thresholds = calibrate_thresholds(fit.meta_scores, options.target_distribution);
  fit.pipeline.target_distribution = options.target_distribution;
  fit.pipeline.features = ds.feature_specs();
  fit.pipeline.target_name = ds.target_name();
  fit.configs = std::move(configs);
  return fit;
}

}  // namespace fewboost
