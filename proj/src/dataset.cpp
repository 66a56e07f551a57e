#include "fewboost/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <numeric>
#include <optional>
#include <sstream>
#include <unordered_map>

#include "fewboost/error.hpp"

namespace fewboost {
namespace {

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t");
  return s.substr(first, last - first + 1);
}

// Finite number or nullopt. Empty input is handled by the caller.
std::optional<double> parse_number(std::string_view token) {
  token = trim(token);
  if (!token.empty() && token.front() == '+') token.remove_prefix(1);
  double v = 0.0;
  const auto* end = token.data() + token.size();
  auto [ptr, ec] = std::from_chars(token.data(), end, v);
  if (ec != std::errc() || ptr != end || !std::isfinite(v)) return std::nullopt;
  return v;
}

std::string slurp(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open file: " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

CsvTable parse_csv_text(std::string_view text) {
  std::vector<std::vector<std::string>> records;
  std::vector<std::size_t> lines;
  std::vector<std::string> record;
  std::string field;
  std::size_t line = 1;
  std::size_t record_line = 1;
  bool in_quotes = false;
  bool field_quoted = false;
  bool record_has_content = false;

  auto end_field = [&] {
    record.push_back(std::move(field));
    field.clear();
    field_quoted = false;
  };
  auto end_record = [&] {
    end_field();
    // Physically empty lines carry no record.
    if (record_has_content || record.size() > 1 || !record.front().empty()) {
      records.push_back(std::move(record));
      lines.push_back(record_line);
    }
    record.clear();
    record_has_content = false;
  };

  if (text.size() >= 3 && text.substr(0, 3) == "\xEF\xBB\xBF") text.remove_prefix(3);

  for (std::size_t i = 0; i < text.size(); ++i) {
    const char c = text[i];
    if (in_quotes) {
      if (c == '"') {
        if (i + 1 < text.size() && text[i + 1] == '"') {
          field.push_back('"');
          ++i;
        } else {
          in_quotes = false;
        }
      } else {
        if (c == '\n') ++line;
        field.push_back(c);
      }
      continue;
    }
    switch (c) {
      case '"':
        if (!trim(field).empty() || field_quoted) {
          throw ParseError("unexpected quote inside unquoted field", line,
                           record.size() + 1);
        }
        field.clear();
        in_quotes = true;
        field_quoted = true;
        record_has_content = true;
        break;
      case ',':
        end_field();
        record_has_content = true;
        break;
      case '\r':
        if (i + 1 < text.size() && text[i + 1] == '\n') break;
        [[fallthrough]];
      case '\n':
        end_record();
        ++line;
        record_line = line;
        break;
      default:
        if (field_quoted && c != ' ' && c != '\t') {
          throw ParseError("characters after closing quote", line,
                           record.size() + 1);
        }
        if (!field_quoted) field.push_back(c);
        break;
    }
  }
  if (in_quotes) {
    throw ParseError("unterminated quoted field", record_line,
                     record.size() + 1);
  }
  if (!field.empty() || !record.empty() || record_has_content) end_record();

  if (records.empty()) throw ParseError("missing header row", 1, 0);

  CsvTable table;
  table.header = std::move(records.front());
  for (auto& h : table.header) h = std::string(trim(h));
  for (std::size_t r = 1; r < records.size(); ++r) {
    if (records[r].size() != table.header.size()) {
      throw ParseError("expected " + std::to_string(table.header.size()) +
                           " fields, found " +
                           std::to_string(records[r].size()),
                       lines[r], std::min(records[r].size(), table.header.size()) + 1);
    }
    table.rows.push_back(std::move(records[r]));
    table.line_numbers.push_back(lines[r]);
  }
  return table;
}

std::string role_name(ColumnRole role) {
  switch (role) {
    case ColumnRole::kNumeric: return "numeric";
    case ColumnRole::kCategorical: return "categorical";
    case ColumnRole::kTarget: return "target";
    case ColumnRole::kIgnore: return "ignore";
  }
  return "?";
}

double parse_numeric_cell(const CsvTable& t, std::size_t r, std::size_t c) {
  const std::string_view cell = trim(t.rows[r][c]);
  if (cell.empty()) return kMissing;
  const auto v = parse_number(cell);
  if (!v) {
    throw ParseError("non-numeric value '" + std::string(cell) +
                         "' in numeric column '" + t.header[c] + "'",
                     t.line_numbers[r], c + 1);
  }
  return *v;
}

}  // namespace

// -- Schema ------------------------------------------------------------------

Schema parse_schema(const nlohmann::json& j) {
  if (!j.is_object()) throw SchemaError("schema must be a JSON object");
  Schema schema;
  for (const auto& [name, value] : j.items()) {
    if (!value.is_string()) {
      throw SchemaError("schema entry '" + name + "' must be a string");
    }
    const auto s = value.get<std::string>();
    if (s == "numeric") {
      schema[name] = ColumnRole::kNumeric;
    } else if (s == "categorical") {
      schema[name] = ColumnRole::kCategorical;
    } else if (s == "target") {
      schema[name] = ColumnRole::kTarget;
    } else if (s == "ignore") {
      schema[name] = ColumnRole::kIgnore;
    } else {
      throw SchemaError("unknown column type '" + s + "' for '" + name + "'");
    }
  }
  return schema;
}

Schema load_schema(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) {
    throw Error("schema file not found: " + path.string());
  }
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(slurp(path));
  } catch (const nlohmann::json::parse_error& e) {
    throw SchemaError("invalid schema JSON in " + path.string() + ": " + e.what());
  }
  return parse_schema(j);
}

Schema infer_schema(const std::filesystem::path& path,
                    const std::string& target_column) {
  const CsvTable t = read_csv(path);
  Schema schema;
  bool found_target = false;
  for (std::size_t c = 0; c < t.header.size(); ++c) {
    if (t.header[c] == target_column) {
      schema[t.header[c]] = ColumnRole::kTarget;
      found_target = true;
      continue;
    }
    bool numeric = true;
    for (const auto& row : t.rows) {
      const auto cell = trim(row[c]);
      if (!cell.empty() && !parse_number(cell)) {
        numeric = false;
        break;
      }
    }
    schema[t.header[c]] = numeric ? ColumnRole::kNumeric : ColumnRole::kCategorical;
  }
  if (!found_target) {
    throw SchemaError("target column '" + target_column + "' not in " +
                      path.string());
  }
  return schema;
}

void to_json(nlohmann::json& j, const FeatureSpec& spec) {
  j = nlohmann::json{
      {"name", spec.name},
      {"kind", spec.kind == FeatureKind::kNumeric ? "numeric" : "categorical"}};
  if (spec.kind == FeatureKind::kCategorical) j["categories"] = spec.categories;
}

void from_json(const nlohmann::json& j, FeatureSpec& spec) {
  spec.name = j.at("name").get<std::string>();
  const auto kind = j.at("kind").get<std::string>();
  if (kind == "numeric") {
    spec.kind = FeatureKind::kNumeric;
  } else if (kind == "categorical") {
    spec.kind = FeatureKind::kCategorical;
  } else {
    throw SchemaError("unknown feature kind '" + kind + "'");
  }
  spec.categories.clear();
  if (j.contains("categories")) {
    spec.categories = j.at("categories").get<std::vector<std::string>>();
  }
}

// -- Dataset -----------------------------------------------------------------

Dataset::Dataset(std::vector<FeatureColumn> columns, std::vector<double> target,
                 std::string target_name)
    : columns_(std::move(columns)),
      target_(std::move(target)),
      target_name_(std::move(target_name)) {
  n_rows_ = columns_.empty() ? target_.size() : columns_.front().values.size();
  for (const auto& col : columns_) {
    if (col.values.size() != n_rows_) {
      throw ValidationError("column '" + col.spec.name + "' has " +
                            std::to_string(col.values.size()) + " rows, expected " +
                            std::to_string(n_rows_));
    }
    if (col.spec.kind != FeatureKind::kCategorical) continue;
    for (double v : col.values) {
      if (is_missing(v)) continue;
      if (v < 0 || v != std::floor(v) || v > 1e15) {
        throw ValidationError("categorical column '" + col.spec.name +
                              "' holds a non-code value");
      }
    }
  }
  if (!target_.empty() && target_.size() != n_rows_) {
    throw ValidationError("target has " + std::to_string(target_.size()) +
                          " rows, expected " + std::to_string(n_rows_));
  }
}

std::vector<double> Dataset::row(std::size_t r) const {
  std::vector<double> out;
  out.reserve(columns_.size());
  for (const auto& col : columns_) out.push_back(col.values[r]);
  return out;
}

std::vector<FeatureSpec> Dataset::feature_specs() const {
  std::vector<FeatureSpec> specs;
  specs.reserve(columns_.size());
  for (const auto& col : columns_) specs.push_back(col.spec);
  return specs;
}

Dataset Dataset::subset(std::span<const std::size_t> rows) const {
  std::vector<FeatureColumn> cols;
  cols.reserve(columns_.size());
  for (const auto& col : columns_) {
    FeatureColumn c{col.spec, {}};
    c.values.reserve(rows.size());
    for (auto r : rows) c.values.push_back(col.values.at(r));
    cols.push_back(std::move(c));
  }
  std::vector<double> target;
  if (!target_.empty()) {
    target.reserve(rows.size());
    for (auto r : rows) target.push_back(target_.at(r));
  }
  Dataset out(std::move(cols), std::move(target), target_name_);
  out.n_rows_ = rows.size();
  return out;
}

Dataset Dataset::select_features(std::span<const std::size_t> features) const {
  std::vector<FeatureColumn> cols;
  cols.reserve(features.size());
  for (auto f : features) cols.push_back(columns_.at(f));
  Dataset out(std::move(cols), target_, target_name_);
  out.n_rows_ = n_rows_;
  return out;
}

Dataset Dataset::with_target(std::vector<double> target) const {
  Dataset out(columns_, std::move(target), target_name_);
  out.n_rows_ = n_rows_;
  return out;
}

// -- CSV ---------------------------------------------------------------------

CsvTable read_csv(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) {
    throw Error("data file not found: " + path.string());
  }
  return parse_csv_text(slurp(path));
}

Dataset load_csv(const std::filesystem::path& path, const Schema& schema) {
  const CsvTable t = read_csv(path);

  std::optional<std::size_t> target_col;
  for (std::size_t c = 0; c < t.header.size(); ++c) {
    const auto it = schema.find(t.header[c]);
    if (it == schema.end()) {
      throw SchemaError("column '" + t.header[c] + "' not declared in schema");
    }
    if (it->second == ColumnRole::kTarget) {
      if (target_col) throw SchemaError("schema declares more than one target");
      target_col = c;
    }
  }
  for (const auto& [name, role] : schema) {
    if (std::find(t.header.begin(), t.header.end(), name) == t.header.end()) {
      throw SchemaError("schema column '" + name + "' (" + role_name(role) +
                        ") missing from " + path.string());
    }
  }
  if (!target_col) throw SchemaError("schema declares no target column");

  std::vector<FeatureColumn> columns;
  std::vector<double> target;
  target.reserve(t.rows.size());
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    target.push_back(parse_numeric_cell(t, r, *target_col));
  }
  for (std::size_t c = 0; c < t.header.size(); ++c) {
    const ColumnRole role = schema.at(t.header[c]);
    if (role == ColumnRole::kNumeric) {
      FeatureColumn col{{t.header[c], FeatureKind::kNumeric, {}}, {}};
      col.values.reserve(t.rows.size());
      for (std::size_t r = 0; r < t.rows.size(); ++r) {
        col.values.push_back(parse_numeric_cell(t, r, c));
      }
      columns.push_back(std::move(col));
    } else if (role == ColumnRole::kCategorical) {
      FeatureColumn col{{t.header[c], FeatureKind::kCategorical, {}}, {}};
      std::unordered_map<std::string, std::size_t> codes;
      col.values.reserve(t.rows.size());
      for (const auto& row : t.rows) {
        const std::string label(trim(row[c]));
        if (label.empty()) {
          col.values.push_back(kMissing);
          continue;
        }
        auto [it, inserted] = codes.try_emplace(label, codes.size());
        if (inserted) col.spec.categories.push_back(label);
        col.values.push_back(static_cast<double>(it->second));
      }
      columns.push_back(std::move(col));
    }
  }
  Dataset ds(std::move(columns), std::move(target), t.header[*target_col]);
  return ds;
}

Dataset load_csv_with_layout(const std::filesystem::path& path,
                             std::span<const FeatureSpec> layout,
                             const std::string& target_name) {
  const CsvTable t = read_csv(path);
  auto find_col = [&](const std::string& name) -> std::optional<std::size_t> {
    const auto it = std::find(t.header.begin(), t.header.end(), name);
    if (it == t.header.end()) return std::nullopt;
    return static_cast<std::size_t>(it - t.header.begin());
  };

  std::vector<FeatureColumn> columns;
  for (const auto& spec : layout) {
    const auto c = find_col(spec.name);
    if (!c) throw SchemaError("feature column '" + spec.name + "' missing from " + path.string());
    FeatureColumn col{spec, {}};
    col.values.reserve(t.rows.size());
    if (spec.kind == FeatureKind::kNumeric) {
      for (std::size_t r = 0; r < t.rows.size(); ++r) {
        col.values.push_back(parse_numeric_cell(t, r, *c));
      }
    } else {
      std::unordered_map<std::string, std::size_t> codes;
      for (std::size_t i = 0; i < spec.categories.size(); ++i) {
        codes.emplace(spec.categories[i], i);
      }
      for (std::size_t r = 0; r < t.rows.size(); ++r) {
        const std::string label(trim(t.rows[r][*c]));
        const auto it = codes.find(label);
        if (!label.empty() && it != codes.end()) {
          col.values.push_back(static_cast<double>(it->second));
        } else if (!label.empty() && spec.categories.empty()) {
          // No vocabulary recorded: the file carries raw integer codes.
          col.values.push_back(parse_numeric_cell(t, r, *c));
        } else {
          col.values.push_back(kMissing);
        }
      }
    }
    columns.push_back(std::move(col));
  }

  std::vector<double> target;
  if (const auto c = find_col(target_name)) {
    target.reserve(t.rows.size());
    for (std::size_t r = 0; r < t.rows.size(); ++r) {
      target.push_back(parse_numeric_cell(t, r, *c));
    }
  }
  if (columns.empty() && target.empty()) {
    return Dataset({}, std::vector<double>(t.rows.size(), kMissing), target_name);
  }
  Dataset ds(std::move(columns), std::move(target), target_name);
  return ds;
}

// -- Binning -----------------------------------------------------------------

BinIndex FeatureBinning::bin_for(double value) const {
  if (is_missing(value)) return static_cast<BinIndex>(missing_bin());
  if (kind == FeatureKind::kNumeric) {
    const auto it = std::lower_bound(upper_bounds.begin(), upper_bounds.end(), value);
    return static_cast<BinIndex>(it - upper_bounds.begin());
  }
  const auto code = static_cast<std::int64_t>(value);
  const auto it = std::lower_bound(bin_codes.begin(), bin_codes.end(), code);
  if (it == bin_codes.end() || *it != code) {
    return static_cast<BinIndex>(missing_bin());
  }
  return static_cast<BinIndex>(it - bin_codes.begin());
}

void to_json(nlohmann::json& j, const FeatureBinning& b) {
  j = nlohmann::json{
      {"kind", b.kind == FeatureKind::kNumeric ? "numeric" : "categorical"},
      {"num_value_bins", b.num_value_bins}};
  if (b.kind == FeatureKind::kNumeric) {
    j["upper_bounds"] = b.upper_bounds;
  } else {
    j["bin_codes"] = b.bin_codes;
  }
}

void from_json(const nlohmann::json& j, FeatureBinning& b) {
  b.kind = j.at("kind").get<std::string>() == "numeric" ? FeatureKind::kNumeric
                                                        : FeatureKind::kCategorical;
  b.num_value_bins = j.at("num_value_bins").get<std::uint32_t>();
  b.upper_bounds.clear();
  b.bin_codes.clear();
  if (b.kind == FeatureKind::kNumeric) {
    b.upper_bounds = j.at("upper_bounds").get<std::vector<double>>();
    if (b.upper_bounds.size() + 1 != b.num_value_bins) {
      throw ValidationError("bin edge count does not match bin count");
    }
  } else {
    b.bin_codes = j.at("bin_codes").get<std::vector<std::int64_t>>();
    if (b.bin_codes.size() != b.num_value_bins && !(b.bin_codes.empty() && b.num_value_bins == 1)) {
      throw ValidationError("category count does not match bin count");
    }
  }
}

namespace {

FeatureBinning bin_numeric(std::span<const double> values, std::uint32_t max_bin,
                           std::uint32_t min_data_in_bin) {
  std::vector<double> sorted;
  sorted.reserve(values.size());
  for (double v : values) {
    if (!is_missing(v)) sorted.push_back(v);
  }
  std::sort(sorted.begin(), sorted.end());

  std::vector<double> distinct;
  std::vector<std::size_t> counts;
  for (double v : sorted) {
    if (distinct.empty() || distinct.back() != v) {
      distinct.push_back(v);
      counts.push_back(1);
    } else {
      ++counts.back();
    }
  }

  // Each bin is a half-open range [first, last) over `distinct`.
  struct Range {
    std::size_t first, last, count;
  };
  std::vector<Range> ranges;
  std::size_t rest = sorted.size();
  std::size_t i = 0;
  while (i < distinct.size()) {
    const std::size_t bins_left = max_bin - ranges.size();
    const std::size_t even = (rest + bins_left - 1) / bins_left;
    const std::size_t target = std::max<std::size_t>(min_data_in_bin, even);
    Range range{i, i, 0};
    while (i < distinct.size() && range.count < target) {
      range.count += counts[i];
      ++i;
    }
    range.last = i;
    rest -= range.count;
    ranges.push_back(range);
  }
  if (ranges.size() > 1 && ranges.back().count < min_data_in_bin) {
    ranges[ranges.size() - 2].last = ranges.back().last;
    ranges[ranges.size() - 2].count += ranges.back().count;
    ranges.pop_back();
  }

  FeatureBinning b;
  b.kind = FeatureKind::kNumeric;
  b.num_value_bins = static_cast<std::uint32_t>(std::max<std::size_t>(ranges.size(), 1));
  for (std::size_t r = 0; r + 1 < ranges.size(); ++r) {
    const double lo = distinct[ranges[r].last - 1];
    const double hi = distinct[ranges[r].last];
    double mid = lo + (hi - lo) / 2.0;
    if (!(mid < hi)) mid = lo;
    b.upper_bounds.push_back(mid);
  }
  return b;
}

FeatureBinning bin_categorical(std::span<const double> values) {
  FeatureBinning b;
  b.kind = FeatureKind::kCategorical;
  for (double v : values) {
    if (!is_missing(v)) b.bin_codes.push_back(static_cast<std::int64_t>(v));
  }
  std::sort(b.bin_codes.begin(), b.bin_codes.end());
  b.bin_codes.erase(std::unique(b.bin_codes.begin(), b.bin_codes.end()), b.bin_codes.end());
  b.num_value_bins = static_cast<std::uint32_t>(std::max<std::size_t>(b.bin_codes.size(), 1));
  return b;
}

}  // namespace

BinnedDataset bin_features(const Dataset& ds, std::uint32_t max_bin,
                           std::uint32_t min_data_in_bin) {
  if (max_bin < 2) throw ValidationError("max_bin must be >= 2");
  if (max_bin >= std::numeric_limits<BinIndex>::max()) {
    throw ValidationError("max_bin too large");
  }
  if (min_data_in_bin < 1) throw ValidationError("min_data_in_bin must be >= 1");

  BinnedDataset out;
  out.n_rows = ds.n_rows();
  out.max_bin = max_bin;
  out.min_data_in_bin = min_data_in_bin;
  out.features = ds.feature_specs();
  out.target.assign(ds.target().begin(), ds.target().end());
  out.binnings.reserve(ds.n_features());
  out.bins.reserve(ds.n_features());
  for (const auto& col : ds.columns()) {
    FeatureBinning b = col.spec.kind == FeatureKind::kNumeric
                           ? bin_numeric(col.values, max_bin, min_data_in_bin)
                           : bin_categorical(col.values);
    if (b.num_bins() >= std::numeric_limits<BinIndex>::max()) {
      throw ValidationError("feature '" + col.spec.name + "' has too many categories");
    }
    std::vector<BinIndex> bins(ds.n_rows());
    for (std::size_t r = 0; r < ds.n_rows(); ++r) bins[r] = b.bin_for(col.values[r]);
    out.binnings.push_back(std::move(b));
    out.bins.push_back(std::move(bins));
  }
  return out;
}

}  // namespace fewboost
