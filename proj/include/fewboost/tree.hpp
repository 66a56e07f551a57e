#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <vector>

#include "fewboost/dataset.hpp"
#include "fewboost/params.hpp"

namespace fewboost {

using Rng = std::mt19937_64;

struct BinStats {
  double sum_grad = 0.0;
  double sum_hess = 0.0;
  std::size_t count = 0;

  BinStats& operator+=(const BinStats& o) {
    sum_grad += o.sum_grad;
    sum_hess += o.sum_hess;
    count += o.count;
    return *this;
  }
  friend BinStats operator-(BinStats a, const BinStats& b) {
    a.sum_grad -= b.sum_grad;
    a.sum_hess -= b.sum_hess;
    a.count -= b.count;
    return a;
  }
};

// Per-bin gradient statistics of one feature at one node. The last bin is
// the feature's missing bin.
struct FeatureHistogram {
  std::size_t feature = 0;
  FeatureKind kind = FeatureKind::kNumeric;
  std::vector<BinStats> bins;

  std::uint32_t num_value_bins() const {
    return static_cast<std::uint32_t>(bins.size() - 1);
  }
  const BinStats& missing() const { return bins.back(); }
};

// Rows reaching a node and their gradient totals.
struct NodeStats {
  std::span<const std::size_t> rows;
  BinStats totals;

  std::size_t n() const { return totals.count; }
};

NodeStats make_node_stats(std::span<const std::size_t> rows,
                          std::span<const GradientPair> grads);

struct SplitCandidate {
  std::size_t feature = 0;
  bool categorical = false;
  // Numeric: rows with value bin <= threshold_bin go left.
  std::uint32_t threshold_bin = 0;
  // Categorical: value bins sent left (sorted); everything else goes right.
  std::vector<std::uint32_t> left_bins;
  // Where rows in the missing bin go.
  bool default_left = false;
  double gain = 0.0;
  std::size_t n_left = 0;
  std::size_t n_right = 0;
  BinStats left;
  BinStats right;
  // Admissible candidates scored while searching this feature.
  std::size_t candidates_evaluated = 0;
};

// -- Gain evaluators ---------------------------------------------------------

// Count-normalised variance gain of a split:
//   V = 1/n_O * ((sum_left g)^2 / n_left + (sum_right g)^2 / n_right).
double variance_gain(const BinStats& left, const BinStats& right);

// Second-order children score G_L^2/(H_L+l2) + G_R^2/(H_R+l2).
double hessian_children_score(const BinStats& left, const BinStats& right,
                              double l2 = 0.0);

// Improvement of a split over leaving the node whole, under `form`. For
// kHessian: children score minus G^2/(H+l2). For kVariance: V minus the
// unsplit node's (G/n)^2.
double split_gain(const BinStats& left, const BinStats& right, GainForm form,
                  double l2 = 0.0);

// -- Split finding -----------------------------------------------------------

FeatureHistogram build_histogram(const BinnedDataset& bds, std::size_t feature,
                                 const NodeStats& node,
                                 std::span<const GradientPair> grads);

// Exhaustive numeric boundary scan with the min_data_in_leaf gate: a
// boundary is skipped while the left count is below the minimum and the scan
// stops once the right count drops below it. nullopt when nothing is
// admissible or the best gain is not strictly positive.
std::optional<SplitCandidate> find_best_split(const FeatureHistogram& hist,
                                              const NodeStats& node,
                                              const Params& params);

// One uniformly drawn admissible boundary, scored. Same gate as above.
std::optional<SplitCandidate> extra_random_split(const FeatureHistogram& hist,
                                                 const NodeStats& node,
                                                 const Params& params, Rng& rng);

// Category order used by the many-category scan: ascending
// sum_grad / (sum_hess + cat_smooth) over categories holding at least
// min_data_per_group rows at this node. Ties keep bin order.
std::vector<std::uint32_t> categorical_order(const FeatureHistogram& hist,
                                             const Params& params);

// One-vs-other when the node holds <= max_cat_to_onehot categories, ordered
// prefix scan with cat_l2 otherwise. Missing rows always go right. With
// `rng` set, one admissible candidate is drawn uniformly instead.
std::optional<SplitCandidate> categorical_split(const FeatureHistogram& hist,
                                                const NodeStats& node,
                                                const Params& params,
                                                Rng* rng = nullptr);

// Best split over `features` at a node: each feature's candidate comes from
// the routine matching its kind and params.extra_trees; the winner is the
// max-gain candidate, ties to the lower feature index.
std::optional<SplitCandidate> find_node_split(const BinnedDataset& bds,
                                              const NodeStats& node,
                                              std::span<const GradientPair> grads,
                                              std::span<const std::size_t> features,
                                              const Params& params, Rng& rng);

// -- Tree --------------------------------------------------------------------

inline constexpr double kLeafValueClamp = 1e4;

// -G/H clamped to +-kLeafValueClamp; 0 when H <= 0.
double leaf_value(const BinStats& stats);

struct TreeNode {
  bool is_leaf = true;
  std::uint32_t feature = 0;
  bool categorical = false;
  std::uint32_t threshold_bin = 0;
  std::vector<std::uint32_t> left_bins;
  bool default_left = false;
  std::uint32_t missing_bin = 0;
  std::int32_t left = -1;
  std::int32_t right = -1;
  double value = 0.0;
  double gain = 0.0;
  std::size_t count = 0;

  bool goes_left(std::uint32_t bin) const;
};

class Tree {
 public:
  Tree() : nodes_(1) {}
  explicit Tree(std::vector<TreeNode> nodes);

  std::span<const TreeNode> nodes() const { return nodes_; }
  std::size_t num_leaves() const;

  // `bin_of(feature)` yields the bin of the row being routed.
  template <class BinOf>
  const TreeNode& leaf_for(BinOf&& bin_of) const {
    std::size_t i = 0;
    while (!nodes_[i].is_leaf) {
      const auto& n = nodes_[i];
      i = static_cast<std::size_t>(n.goes_left(bin_of(n.feature)) ? n.left : n.right);
    }
    return nodes_[i];
  }

  double predict_row(const BinnedDataset& bds, std::size_t row) const {
    return leaf_for([&](std::uint32_t f) { return bds.bin(row, f); }).value;
  }

  // Nested node objects; reading rebuilds nodes in pre-order.
  void to_json(nlohmann::json& j) const;
  static Tree from_json(const nlohmann::json& j);

 private:
  std::vector<TreeNode> nodes_;
};

// Leaf-wise growth: split the frontier leaf with the largest gain until
// num_leaves is reached or no leaf is splittable.
Tree grow_tree(const BinnedDataset& bds, std::span<const GradientPair> grads,
               std::span<const std::size_t> rows,
               std::span<const std::size_t> feature_subset, const Params& params,
               Rng& rng);

}  // namespace fewboost
