#pragma once

#include <filesystem>
#include <fstream>
#include <random>
#include <string>
#include <vector>

#include "fewboost/dataset.hpp"
#include "fewboost/params.hpp"

namespace testing {

namespace fs = std::filesystem;

// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    std::random_device rd;
    path_ = fs::temp_directory_path() / ("fewboost_" + tag + "_" + std::to_string(rd()));
    fs::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  fs::path operator/(const std::string& name) const { return path_ / name; }
  const fs::path& path() const { return path_; }

 private:
  fs::path path_;
};

inline void write_file(const fs::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary);
  out << text;
}

inline std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline fewboost::FeatureColumn numeric(const std::string& name, std::vector<double> values) {
  return {{name, fewboost::FeatureKind::kNumeric, {}}, std::move(values)};
}

inline fewboost::FeatureColumn categorical(const std::string& name, std::vector<double> codes) {
  return {{name, fewboost::FeatureKind::kCategorical, {}}, std::move(codes)};
}

inline std::vector<fewboost::GradientPair> unit_hess(const std::vector<double>& grads) {
  std::vector<fewboost::GradientPair> out;
  for (double g : grads) out.push_back({g, 1.0});
  return out;
}

// Hand-built binned dataset: bins[f][r] given directly, numeric features with
// `value_bins[f]` value bins (the missing bin follows).
inline fewboost::BinnedDataset binned(const std::vector<std::vector<fewboost::BinIndex>>& bins,
                                      const std::vector<std::uint32_t>& value_bins) {
  fewboost::BinnedDataset bds;
  bds.n_rows = bins.empty() ? 0 : bins[0].size();
  for (std::size_t f = 0; f < bins.size(); ++f) {
    fewboost::FeatureBinning b;
    b.kind = fewboost::FeatureKind::kNumeric;
    b.num_value_bins = value_bins[f];
    for (std::uint32_t i = 0; i + 1 < value_bins[f]; ++i) b.upper_bounds.push_back(i + 0.5);
    bds.binnings.push_back(b);
    bds.features.push_back({"f" + std::to_string(f), fewboost::FeatureKind::kNumeric, {}});
  }
  bds.bins = bins;
  return bds;
}

}  // namespace testing
