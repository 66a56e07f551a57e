#include "fewboost/cli.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

#include "CLI11.hpp"
#include "fewboost/booster.hpp"
#include "fewboost/dataset.hpp"
#include "fewboost/error.hpp"
#include "fewboost/fsl.hpp"
#include "fewboost/params.hpp"
#include "fewboost/stacking.hpp"

namespace fewboost::cli {

namespace fs = std::filesystem;

namespace {

struct DataArgs {
  std::string data;
  std::string schema;
  std::string target;
};

struct ParamArgs {
  std::string params_file;
};

std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

void require_file(const std::string& path, const std::string& what) {
  if (path.empty()) throw ValidationError(what + " path is empty");
  if (!fs::is_regular_file(path)) throw Error(what + " not found: " + path);
}

nlohmann::json read_json(const std::string& path, const std::string& what) {
  require_file(path, what);
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + what + ": " + path);
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ValidationError("invalid JSON in " + path + ": " + e.what());
  }
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path);
  out << text;
  if (!out) throw Error("write failed: " + path);
}

Dataset load_labeled(const DataArgs& a) {
  require_file(a.data, "data file");
  Schema schema;
  if (!a.schema.empty()) {
    require_file(a.schema, "schema file");
    schema = load_schema(a.schema);
  } else if (!a.target.empty()) {
    schema = infer_schema(a.data, a.target);
  } else {
    throw ValidationError("--schema or --target is required");
  }
  return load_csv(a.data, schema);
}

Params overlay_params(Params base, const ParamArgs& a) {
  if (!a.params_file.empty()) from_json(read_json(a.params_file, "params file"), base);
  base.validate();
  return base;
}

NamedPreset resolve_preset(const std::string& name, const ParamArgs& a) {
  NamedPreset p;
  if (name == "default" || name == "fsl") {
    p = preset_by_name(name);
  } else {
    if (!fs::is_regular_file(name)) {
      throw ValidationError("unknown preset '" + name + "' (expected default, fsl or a params file)");
    }
    p.name = fs::path(name).stem().string();
    p.params = default_preset();
    from_json(read_json(name, "preset file"), p.params);
  }
  p.params = overlay_params(p.params, a);
  return p;
}

ActionDistribution parse_distribution(const std::vector<double>& v) {
  if (v.size() != 3) throw ValidationError("--target-dist needs three values: sell,hold,buy");
  ActionDistribution d{v[0], v[1], v[2]};
  d.validate();
  return d;
}

void add_data_options(CLI::App* cmd, DataArgs& a) {
  cmd->add_option("--data", a.data, "Input CSV")->required();
  cmd->add_option("--schema", a.schema, "Schema JSON mapping column -> role");
  cmd->add_option("--target", a.target, "Target column when inferring the schema");
}

// -- Commands ----------------------------------------------------------------

struct BenchArgs {
  DataArgs data;
  ParamArgs params;
  std::vector<std::string> presets{"fsl"};
  std::vector<std::size_t> shots{4, 8, 16, 32, 64};
  std::size_t seeds = 20;
  std::uint64_t seed = 0;
  std::string name;
  std::string out;
};

int cmd_bench(const BenchArgs& a, std::ostream& out) {
  const Dataset ds = load_labeled(a.data);
  std::vector<NamedPreset> presets;
  for (const auto& p : a.presets) presets.push_back(resolve_preset(p, a.params));
  if (a.seeds == 0) throw ValidationError("--seeds must be positive");
  if (a.shots.empty()) throw ValidationError("--shots is empty");
  std::vector<std::uint64_t> seeds(a.seeds);
  for (std::size_t i = 0; i < a.seeds; ++i) seeds[i] = a.seed + i;

  const std::string name = a.name.empty() ? fs::path(a.data.data).stem().string() : a.name;
  const BenchmarkReport report = run_benchmark(ds, a.shots, seeds, presets, name);
  const std::string table = report.to_table();
  write_text(a.out, report.to_json().dump(1) + "\n");
  write_text(a.out + ".txt", table);
  out << table;
  return report.has_failures() ? kExitPartial : kExitOk;
}

struct TrainArgs {
  DataArgs data;
  ParamArgs params;
  std::string preset = "default";
  std::string objective = "auto";
  std::uint64_t seed = 0;
  std::string out;
};

int cmd_train(const TrainArgs& a, std::ostream& out) {
  const Dataset ds = load_labeled(a.data);
  NamedPreset preset = resolve_preset(a.preset, a.params);
  if (a.objective == "auto") {
    const auto y = ds.target();
    const bool binary = std::all_of(y.begin(), y.end(), [](double v) { return v == 0.0 || v == 1.0; });
    preset.params.objective = binary ? Objective::kBinaryLogloss : Objective::kMse;
  } else {
    preset.params.objective = objective_from_string(a.objective);
  }
  preset.params.seed = a.seed;
  const Model model = train(ds, preset.params);
  model.save(a.out);
  out << "trained " << model.trees.size() << " trees on " << ds.n_rows() << " rows ("
      << to_string(model.objective()) << ", preset " << preset.name << ")\n";
  return kExitOk;
}

struct PredictArgs {
  std::string model;
  std::string data;
  std::string out;
};

int cmd_predict(const PredictArgs& a, std::ostream& out) {
  const nlohmann::json doc = read_json(a.model, "model file");
  require_file(a.data, "data file");
  std::ostringstream csv;
  const bool is_pipeline = doc.is_object() && doc.value("format", "") == "fewboost-pipeline";
  if (is_pipeline) {
    const auto pipeline = StackingPipeline::from_json(doc);
    const Dataset rows = load_csv_with_layout(a.data, pipeline.features, pipeline.target_name);
    const auto scores = pipeline.blended_scores(rows);
    const auto actions = apply_thresholds(pipeline.thresholds, scores);
    csv << "row_id,blended_score,action\n";
    for (std::size_t r = 0; r < scores.size(); ++r) {
      csv << r << ',' << format_double(scores[r]) << ',' << actions[r] << '\n';
    }
  } else {
    const Model model = Model::from_json(doc);
    const Dataset rows = load_csv_with_layout(a.data, model.features, model.target_name);
    const auto scores = model.predict(rows);
    csv << "row_id,score\n";
    for (std::size_t r = 0; r < scores.size(); ++r) {
      csv << r << ',' << format_double(scores[r]) << '\n';
    }
  }
  if (a.out.empty()) {
    out << csv.str();
  } else {
    write_text(a.out, csv.str());
  }
  return kExitOk;
}

struct StackArgs {
  DataArgs data;
  ParamArgs params;
  std::string preset = "fsl";
  std::size_t shots_per_model = 300;
  std::uint64_t seed = 0;
  std::vector<double> target_dist{0.25, 0.50, 0.25};
  std::string relative_prefix = "dI";
  std::string out;
};

int cmd_stack(const StackArgs& a, std::ostream& out) {
  const ActionDistribution dist = parse_distribution(a.target_dist);
  const Dataset ds = load_labeled(a.data);
  const NamedPreset preset = resolve_preset(a.preset, a.params);
  const auto configs = stock_level0_configs(group_features(ds, a.relative_prefix), preset.params);

  StackingOptions options;
  options.k_per_model = a.shots_per_model;
  options.seed = a.seed;
  options.target_distribution = dist;
  const StackingFit fit = fit_stacking(ds, configs, options);
  fit.pipeline.save(a.out);

  const auto actions = apply_thresholds(fit.pipeline.thresholds, fit.meta_scores);
  std::size_t counts[3] = {0, 0, 0};
  for (int act : actions) ++counts[act + 1];
  out << "level-0 models: " << fit.pipeline.level0.size() << " x " << a.shots_per_model
      << " shots; meta pool " << fit.partition.meta_pool.size() << " rows; best epoch "
      << fit.mlp_fit.best_epoch << "\n"
      << "meta-pool actions sell/hold/buy: " << counts[0] << '/' << counts[1] << '/' << counts[2]
      << '\n';
  return kExitOk;
}

struct CalibrateArgs {
  std::string data;
  std::string column;
  std::vector<double> target_dist;
  std::string out;
};

int cmd_calibrate(const CalibrateArgs& a, std::ostream& out) {
  const ActionDistribution dist = parse_distribution(a.target_dist);
  require_file(a.data, "scores file");
  const CsvTable table = read_csv(a.data);
  if (table.header.empty()) throw ValidationError("scores file has no header");

  std::size_t col = table.header.size() - 1;
  auto find = [&](const std::string& name) {
    const auto it = std::find(table.header.begin(), table.header.end(), name);
    return it == table.header.end() ? std::optional<std::size_t>{}
                                    : std::optional<std::size_t>(static_cast<std::size_t>(it - table.header.begin()));
  };
  if (!a.column.empty()) {
    const auto c = find(a.column);
    if (!c) throw ValidationError("column '" + a.column + "' not in " + a.data);
    col = *c;
  } else if (const auto c = find("blended_score")) {
    col = *c;
  } else if (const auto c2 = find("score")) {
    col = *c2;
  }

  std::vector<double> scores;
  scores.reserve(table.rows.size());
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    const std::string& cell = table.rows[r][col];
    double v = 0.0;
    const auto res = std::from_chars(cell.data(), cell.data() + cell.size(), v);
    if (res.ec != std::errc() || res.ptr != cell.data() + cell.size() || std::isnan(v)) {
      throw ParseError("not a score: '" + cell + "'", table.line_numbers[r], col + 1);
    }
    scores.push_back(v);
  }

  const ActionThresholds t = calibrate_thresholds(scores, dist);
  const auto actions = apply_thresholds(t, scores);
  std::size_t counts[3] = {0, 0, 0};
  for (int act : actions) ++counts[act + 1];

  auto bound = [](double v) -> nlohmann::json {
    if (std::isinf(v)) return v < 0 ? "-inf" : "inf";
    return v;
  };
  const nlohmann::json doc{
      {"format", "fewboost-thresholds"},
      {"version", 1},
      {"t_low", bound(t.t_low)},
      {"t_high", bound(t.t_high)},
      {"n", scores.size()},
      {"target_distribution", {{"sell", dist.sell}, {"hold", dist.hold}, {"buy", dist.buy}}},
      {"counts", {{"sell", counts[0]}, {"hold", counts[1]}, {"buy", counts[2]}}}};
  write_text(a.out, doc.dump(1) + "\n");
  out << "sell/hold/buy: " << counts[0] << '/' << counts[1] << '/' << counts[2] << '\n';
  return kExitOk;
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"fewboost: few-shot gradient boosting toolkit"};
  app.require_subcommand(1);

  BenchArgs bench;
  auto* c_bench = app.add_subcommand("bench", "k-shot AUC benchmark over presets and seeds");
  add_data_options(c_bench, bench.data);
  c_bench->add_option("--preset", bench.presets, "default, fsl or a params file; comma list")
      ->delimiter(',');
  c_bench->add_option("--params", bench.params.params_file, "JSON overlay applied to every preset");
  c_bench->add_option("--shots", bench.shots, "Shot counts, comma list")->delimiter(',');
  c_bench->add_option("--seeds", bench.seeds, "Number of seeds");
  c_bench->add_option("--seed", bench.seed, "First seed");
  c_bench->add_option("--name", bench.name, "Dataset label in the report");
  c_bench->add_option("--out", bench.out, "Report JSON; the table goes to <out>.txt")->required();

  TrainArgs tr;
  auto* c_train = app.add_subcommand("train", "Train a model on a labelled CSV");
  add_data_options(c_train, tr.data);
  c_train->add_option("--preset", tr.preset, "default, fsl or a params file");
  c_train->add_option("--params", tr.params.params_file, "JSON parameter overlay");
  c_train->add_option("--objective", tr.objective, "auto, binary, mse or mae");
  c_train->add_option("--seed", tr.seed, "Random seed");
  c_train->add_option("--out", tr.out, "Model JSON")->required();

  PredictArgs pr;
  auto* c_predict = app.add_subcommand("predict", "Score a CSV with a model or pipeline");
  c_predict->add_option("--model", pr.model, "Model or pipeline JSON")->required();
  c_predict->add_option("--data", pr.data, "Input CSV")->required();
  c_predict->add_option("--out", pr.out, "Scores CSV (stdout if omitted)");

  StackArgs st;
  auto* c_stack = app.add_subcommand("stack", "Fit the level-0 / MLP stacking pipeline");
  add_data_options(c_stack, st.data);
  c_stack->add_option("--preset", st.preset, "Level-0 base parameters: default, fsl or a params file");
  c_stack->add_option("--params", st.params.params_file, "JSON parameter overlay");
  c_stack->add_option("--shots-per-model", st.shots_per_model, "Rows per level-0 model");
  c_stack->add_option("--seed", st.seed, "Random seed");
  c_stack->add_option("--target-dist", st.target_dist, "sell,hold,buy fractions")->delimiter(',');
  c_stack->add_option("--relative-prefix", st.relative_prefix, "Name prefix of relative features");
  c_stack->add_option("--out", st.out, "Pipeline JSON")->required();

  CalibrateArgs ca;
  auto* c_cal = app.add_subcommand("calibrate", "Action thresholds for a scores file");
  c_cal->add_option("--data", ca.data, "Scores CSV")->required();
  c_cal->add_option("--column", ca.column, "Score column (default blended_score, score, or last)");
  c_cal->add_option("--target-dist", ca.target_dist, "sell,hold,buy fractions")
      ->delimiter(',')
      ->required();
  c_cal->add_option("--out", ca.out, "Thresholds JSON")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitError;
  }

  try {
    if (c_bench->parsed()) return cmd_bench(bench, out);
    if (c_train->parsed()) return cmd_train(tr, out);
    if (c_predict->parsed()) return cmd_predict(pr, out);
    if (c_stack->parsed()) return cmd_stack(st, out);
    if (c_cal->parsed()) return cmd_calibrate(ca, out);
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitError;
  }
  return kExitError;
}

int run(int argc, char** argv) { return run(argc, argv, std::cout, std::cerr); }

}  // namespace fewboost::cli
