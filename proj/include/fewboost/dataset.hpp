#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <limits>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"

namespace fewboost {

// Missing cells are stored as quiet NaN in every column type.
inline constexpr double kMissing = std::numeric_limits<double>::quiet_NaN();
inline bool is_missing(double v) { return std::isnan(v); }

enum class FeatureKind : std::uint8_t { kNumeric, kCategorical };

enum class ColumnRole { kNumeric, kCategorical, kTarget, kIgnore };

// Column name -> role. Every CSV column must be named exactly once.
using Schema = std::map<std::string, ColumnRole>;

Schema parse_schema(const nlohmann::json& j);
Schema load_schema(const std::filesystem::path& path);

// Guesses a schema from file contents: columns whose non-empty cells all
// parse as finite numbers are numeric, everything else categorical.
Schema infer_schema(const std::filesystem::path& path,
                    const std::string& target_column);

// Layout of one feature column. For categorical features `categories` maps
// dense code -> original label; it may be empty for programmatic data.
struct FeatureSpec {
  std::string name;
  FeatureKind kind = FeatureKind::kNumeric;
  std::vector<std::string> categories;
};

void to_json(nlohmann::json& j, const FeatureSpec& spec);
void from_json(const nlohmann::json& j, FeatureSpec& spec);

struct FeatureColumn {
  FeatureSpec spec;
  // Numeric value or integral category code; kMissing for empty cells.
  std::vector<double> values;
};

class Dataset {
 public:
  Dataset() = default;
  // Throws ValidationError when columns disagree in length or a categorical
  // column holds anything but non-negative integer codes / kMissing.
  Dataset(std::vector<FeatureColumn> columns, std::vector<double> target,
          std::string target_name = "target");

  std::size_t n_rows() const { return n_rows_; }
  std::size_t n_features() const { return columns_.size(); }

  const FeatureColumn& column(std::size_t feature) const {
    return columns_[feature];
  }
  std::span<const FeatureColumn> columns() const { return columns_; }
  std::span<const double> target() const { return target_; }
  const std::string& target_name() const { return target_name_; }
  bool has_target() const { return !target_.empty(); }

  double value(std::size_t row, std::size_t feature) const {
    return columns_[feature].values[row];
  }
  std::vector<double> row(std::size_t r) const;
  std::vector<FeatureSpec> feature_specs() const;

  Dataset subset(std::span<const std::size_t> rows) const;
  Dataset select_features(std::span<const std::size_t> features) const;
  Dataset with_target(std::vector<double> target) const;

 private:
  std::vector<FeatureColumn> columns_;
  std::vector<double> target_;
  std::string target_name_;
  std::size_t n_rows_ = 0;
};

// RFC-4180 CSV with a header row. Categorical strings are coded densely in
// order of first appearance; empty cells become kMissing.
Dataset load_csv(const std::filesystem::path& path, const Schema& schema);

// Reads feature columns by name using a previously fitted layout. Categorical
// labels are coded with the layout's vocabulary; unseen labels become
// missing. The target column is loaded when present, other columns ignored.
Dataset load_csv_with_layout(const std::filesystem::path& path,
                             std::span<const FeatureSpec> layout,
                             const std::string& target_name);

// Raw CSV access, shared with the CLI for score files.
struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
  std::vector<std::size_t> line_numbers;  // 1-based source line of each row
};
CsvTable read_csv(const std::filesystem::path& path);

// -- Binning ---------------------------------------------------------------

using BinIndex = std::uint16_t;

// Value -> bin mapping of one feature. Value bins are [0, num_value_bins);
// the missing bin is always the last index.
struct FeatureBinning {
  FeatureKind kind = FeatureKind::kNumeric;
  std::uint32_t num_value_bins = 1;
  // Numeric: bin b holds values in (upper_bounds[b-1], upper_bounds[b]];
  // the last value bin is unbounded above. Size num_value_bins - 1.
  std::vector<double> upper_bounds;
  // Categorical: bin_codes[b] is the category code housed in value bin b.
  std::vector<std::int64_t> bin_codes;

  std::uint32_t missing_bin() const { return num_value_bins; }
  std::uint32_t num_bins() const { return num_value_bins + 1; }
  BinIndex bin_for(double value) const;
};

void to_json(nlohmann::json& j, const FeatureBinning& b);
void from_json(const nlohmann::json& j, FeatureBinning& b);

// Column-major bin indices plus everything needed to bin unseen rows.
struct BinnedDataset {
  std::size_t n_rows = 0;
  std::uint32_t max_bin = 0;
  std::uint32_t min_data_in_bin = 0;
  std::vector<FeatureSpec> features;
  std::vector<FeatureBinning> binnings;
  std::vector<std::vector<BinIndex>> bins;  // [feature][row]
  std::vector<double> target;

  std::size_t n_features() const { return binnings.size(); }
  BinIndex bin(std::size_t row, std::size_t feature) const {
    return bins[feature][row];
  }
};

// Numeric columns: greedy equal-frequency partition over distinct values;
// every bin holds >= min_data_in_bin rows (a short remainder is merged into
// its neighbour) and there are at most max_bin value bins. Categorical
// columns: one bin per category present. Pure and deterministic.
BinnedDataset bin_features(const Dataset& ds, std::uint32_t max_bin,
                           std::uint32_t min_data_in_bin);

}  // namespace fewboost
