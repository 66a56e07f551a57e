#include "fewboost/booster.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iterator>
#include <numeric>
#include <sstream>

#include "fewboost/error.hpp"

namespace fewboost {

// -- Params ------------------------------------------------------------------

std::string to_string(Objective objective) {
  switch (objective) {
    case Objective::kBinaryLogloss: return "binary";
    case Objective::kMse: return "mse";
    case Objective::kMae: return "mae";
  }
  return "?";
}

Objective objective_from_string(const std::string& name) {
  if (name == "binary" || name == "binary-logloss" || name == "logloss") {
    return Objective::kBinaryLogloss;
  }
  if (name == "mse" || name == "regression") return Objective::kMse;
  if (name == "mae") return Objective::kMae;
  throw ValidationError("unknown objective '" + name + "'");
}

void Params::validate() const {
  auto require = [](bool ok, const char* what) {
    if (!ok) throw ValidationError(std::string("invalid parameter: ") + what);
  };
  require(num_leaves >= 2, "num_leaves must be >= 2");
  require(eta > 0.0 && eta <= 1.0, "eta must be in (0, 1]");
  require(min_data_in_leaf >= 1, "min_data_in_leaf must be >= 1");
  require(feature_fraction > 0.0 && feature_fraction <= 1.0, "feature_fraction must be in (0, 1]");
  require(bagging_fraction > 0.0 && bagging_fraction <= 1.0, "bagging_fraction must be in (0, 1]");
  require(bagging_freq >= 0, "bagging_freq must be >= 0");
  require(min_data_per_group >= 0, "min_data_per_group must be >= 0");
  require(cat_l2 >= 0.0, "cat_l2 must be >= 0");
  require(cat_smooth >= 0.0, "cat_smooth must be >= 0");
  require(max_cat_to_onehot >= 0, "max_cat_to_onehot must be >= 0");
  require(min_data_in_bin >= 1, "min_data_in_bin must be >= 1");
  require(max_bin >= 2 && max_bin < 65535, "max_bin must be in [2, 65535)");
  require(n_rounds >= 0, "n_rounds must be >= 0");
}

void to_json(nlohmann::json& j, const Params& p) {
  j = nlohmann::json{{"extra_trees", p.extra_trees},
                     {"num_leaves", p.num_leaves},
                     {"eta", p.eta},
                     {"min_data_in_leaf", p.min_data_in_leaf},
                     {"feature_fraction", p.feature_fraction},
                     {"bagging_fraction", p.bagging_fraction},
                     {"bagging_freq", p.bagging_freq},
                     {"min_data_per_group", p.min_data_per_group},
                     {"cat_l2", p.cat_l2},
                     {"cat_smooth", p.cat_smooth},
                     {"max_cat_to_onehot", p.max_cat_to_onehot},
                     {"min_data_in_bin", p.min_data_in_bin},
                     {"max_bin", p.max_bin},
                     {"n_rounds", p.n_rounds},
                     {"objective", to_string(p.objective)},
                     {"seed", p.seed},
                     {"gain_form", p.gain_form == GainForm::kHessian ? "hessian" : "variance"}};
}

void from_json(const nlohmann::json& j, Params& p) {
  if (!j.is_object()) throw ValidationError("params must be a JSON object");
  for (const auto& [key, value] : j.items()) {
    try {
      if (key == "extra_trees") p.extra_trees = value.get<bool>();
      else if (key == "num_leaves") p.num_leaves = value.get<int>();
      else if (key == "eta" || key == "learning_rate") p.eta = value.get<double>();
      else if (key == "min_data_in_leaf") p.min_data_in_leaf = value.get<int>();
      else if (key == "feature_fraction") p.feature_fraction = value.get<double>();
      else if (key == "bagging_fraction") p.bagging_fraction = value.get<double>();
      else if (key == "bagging_freq") p.bagging_freq = value.get<int>();
      else if (key == "min_data_per_group") p.min_data_per_group = value.get<int>();
      else if (key == "cat_l2") p.cat_l2 = value.get<double>();
      else if (key == "cat_smooth") p.cat_smooth = value.get<double>();
      else if (key == "max_cat_to_onehot") p.max_cat_to_onehot = value.get<int>();
      else if (key == "min_data_in_bin") p.min_data_in_bin = value.get<int>();
      else if (key == "max_bin") p.max_bin = value.get<int>();
      else if (key == "n_rounds") p.n_rounds = value.get<int>();
      else if (key == "objective") p.objective = objective_from_string(value.get<std::string>());
      else if (key == "seed") p.seed = value.get<std::uint64_t>();
      else if (key == "gain_form") {
        const auto form = value.get<std::string>();
        if (form == "hessian") p.gain_form = GainForm::kHessian;
        else if (form == "variance") p.gain_form = GainForm::kVariance;
        else throw ValidationError("unknown gain_form '" + form + "'");
      } else {
        throw ValidationError("unknown parameter '" + key + "'");
      }
    } catch (const nlohmann::json::exception& e) {
      throw ValidationError("parameter '" + key + "' has the wrong type: " + e.what());
    }
  }
}

// -- Objectives --------------------------------------------------------------

double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

std::vector<GradientPair> compute_gradients(Objective objective,
                                            std::span<const double> targets,
                                            std::span<const double> scores) {
  if (targets.size() != scores.size()) {
    throw ValidationError("targets and scores differ in length");
  }
  std::vector<GradientPair> out(targets.size());
  for (std::size_t i = 0; i < targets.size(); ++i) {
    const double y = targets[i];
    const double s = scores[i];
    switch (objective) {
      case Objective::kBinaryLogloss: {
        const double p = sigmoid(s);
        out[i] = {p - y, p * (1.0 - p)};
        break;
      }
      case Objective::kMse:
        out[i] = {s - y, 1.0};
        break;
      case Objective::kMae:
        out[i] = {static_cast<double>((s > y) - (s < y)), 1.0};
        break;
    }
  }
  return out;
}

double initial_score(Objective objective, std::span<const double> targets) {
  if (targets.empty()) return 0.0;
  const double mean =
      std::accumulate(targets.begin(), targets.end(), 0.0) / static_cast<double>(targets.size());
  if (objective != Objective::kBinaryLogloss) return mean;
  constexpr double kClamp = 10.0;
  if (mean <= 0.0) return -kClamp;
  if (mean >= 1.0) return kClamp;
  return std::clamp(std::log(mean / (1.0 - mean)), -kClamp, kClamp);
}

void validate_targets(Objective objective, std::span<const double> targets) {
  for (double y : targets) {
    if (!std::isfinite(y)) throw ValidationError("target contains missing or non-finite values");
    if (objective == Objective::kBinaryLogloss && y != 0.0 && y != 1.0) {
      throw ValidationError("binary objective needs targets in {0, 1}");
    }
  }
}

// -- Training ----------------------------------------------------------------

Model train(const BinnedDataset& bds, const Params& params) {
  params.validate();
  const std::size_t n = bds.n_rows;
  if (n == 0) throw ValidationError("training set is empty");
  if (bds.target.size() != n) throw ValidationError("training set has no target");
  validate_targets(params.objective, bds.target);

  Model model;
  model.params = params;
  model.features = bds.features;
  model.binnings = bds.binnings;
  model.base_score = initial_score(params.objective, bds.target);

  Rng rng(params.seed);
  std::vector<double> scores(n, model.base_score);

  std::vector<std::size_t> all_rows(n);
  std::iota(all_rows.begin(), all_rows.end(), 0);
  std::vector<std::size_t> all_features(bds.n_features());
  std::iota(all_features.begin(), all_features.end(), 0);

  const auto bag_size = std::max<std::size_t>(
      1, static_cast<std::size_t>(std::floor(params.bagging_fraction * static_cast<double>(n))));
  const std::size_t feature_count = std::clamp<std::size_t>(
      static_cast<std::size_t>(params.feature_fraction * static_cast<double>(all_features.size()) + 0.5),
      1, std::max<std::size_t>(all_features.size(), 1));

  std::vector<std::size_t> bag = all_rows;
  for (int round = 0; round < params.n_rounds; ++round) {
    const auto grads = compute_gradients(params.objective, bds.target, scores);

    if (params.bagging_freq > 0 && round % params.bagging_freq == 0) {
      bag.clear();
      std::sample(all_rows.begin(), all_rows.end(), std::back_inserter(bag), bag_size, rng);
    }
    std::vector<std::size_t> features;
    if (feature_count < all_features.size()) {
      std::sample(all_features.begin(), all_features.end(), std::back_inserter(features),
                  feature_count, rng);
    } else {
      features = all_features;
    }

    Tree tree = grow_tree(bds, grads, bag, features, params, rng);
    for (std::size_t r = 0; r < n; ++r) scores[r] += params.eta * tree.predict_row(bds, r);
    model.trees.push_back(std::move(tree));
  }
  return model;
}

Model train(const Dataset& ds, const Params& params) {
  params.validate();
  const BinnedDataset bds =
      bin_features(ds, static_cast<std::uint32_t>(params.max_bin),
                   static_cast<std::uint32_t>(params.min_data_in_bin));
  Model model = train(bds, params);
  model.target_name = ds.target_name();
  return model;
}

// -- Prediction --------------------------------------------------------------

double Model::predict_raw(std::span<const double> row) const {
  if (row.size() != binnings.size()) {
    throw ValidationError("row has " + std::to_string(row.size()) + " features, model expects " +
                          std::to_string(binnings.size()));
  }
  std::vector<BinIndex> bins(row.size());
  for (std::size_t f = 0; f < row.size(); ++f) bins[f] = binnings[f].bin_for(row[f]);
  double sum = 0.0;
  for (const auto& tree : trees) {
    sum += tree.leaf_for([&](std::uint32_t f) { return bins[f]; }).value;
  }
  return base_score + params.eta * sum;
}

double Model::predict(std::span<const double> row) const {
  const double raw = predict_raw(row);
  return params.objective == Objective::kBinaryLogloss ? sigmoid(raw) : raw;
}

std::vector<double> Model::predict(const Dataset& rows) const {
  if (rows.n_features() != binnings.size()) {
    throw ValidationError("dataset has " + std::to_string(rows.n_features()) +
                          " features, model expects " + std::to_string(binnings.size()));
  }
  for (std::size_t f = 0; f < binnings.size(); ++f) {
    if (rows.column(f).spec.kind != binnings[f].kind) {
      throw ValidationError("feature '" + rows.column(f).spec.name + "' has the wrong kind");
    }
  }
  std::vector<double> out(rows.n_rows());
  std::vector<double> row(rows.n_features());
  for (std::size_t r = 0; r < rows.n_rows(); ++r) {
    for (std::size_t f = 0; f < row.size(); ++f) row[f] = rows.value(r, f);
    out[r] = predict(row);
  }
  return out;
}

// -- Serialization -----------------------------------------------------------

nlohmann::json Model::to_json() const {
  nlohmann::json trees_json = nlohmann::json::array();
  for (const auto& t : trees) {
    nlohmann::json tj;
    t.to_json(tj);
    trees_json.push_back(std::move(tj));
  }
  return nlohmann::json{{"format", "fewboost-model"},
                        {"version", kModelFormatVersion},
                        {"objective", to_string(params.objective)},
                        {"base_score", base_score},
                        {"target_name", target_name},
                        {"params", params},
                        {"features", features},
                        {"binnings", binnings},
                        {"trees", std::move(trees_json)}};
}

Model Model::from_json(const nlohmann::json& j) {
  try {
    if (j.at("format").get<std::string>() != "fewboost-model") {
      throw ValidationError("not a fewboost model document");
    }
    if (j.at("version").get<int>() != kModelFormatVersion) {
      throw ValidationError("unsupported model version " + j.at("version").dump());
    }
    Model m;
    fewboost::from_json(j.at("params"), m.params);
    m.base_score = j.at("base_score").get<double>();
    m.target_name = j.at("target_name").get<std::string>();
    m.features = j.at("features").get<std::vector<FeatureSpec>>();
    m.binnings = j.at("binnings").get<std::vector<FeatureBinning>>();
    if (m.features.size() != m.binnings.size()) {
      throw ValidationError("model feature and binning counts differ");
    }
    for (const auto& tj : j.at("trees")) m.trees.push_back(Tree::from_json(tj));
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("malformed model document: ") + e.what());
  }
}

void Model::save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  out << to_json().dump(1) << '\n';
}

Model Model::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open model file: " + path.string());
  try {
    return from_json(nlohmann::json::parse(in));
  } catch (const nlohmann::json::parse_error& e) {
    throw ValidationError("invalid model JSON in " + path.string() + ": " + e.what());
  }
}

}  // namespace fewboost
