#include "fewboost/tree.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "fewboost/error.hpp"

namespace fewboost {
namespace {

double leaf_score(double g, double denom) { return denom > 0.0 ? g * g / denom : 0.0; }

bool better(const std::optional<SplitCandidate>& best, double gain) {
  return !best || gain > best->gain;
}

bool acceptable(double gain) { return std::isfinite(gain) && gain > 0.0; }

// Boundary t with missing rows routed left or right.
struct Boundary {
  std::uint32_t bin;
  bool missing_left;
  BinStats left;
  BinStats right;
};

// Visits every admissible numeric boundary in (bin, direction) order. Each
// direction is its own cumulative scan with the min_data_in_leaf gate:
// continue while the left side is too small, stop once the right side is.
template <class Visit>
void scan_numeric(const FeatureHistogram& hist, const NodeStats& node,
                  std::size_t min_data_in_leaf, Visit&& visit) {
  const std::uint32_t value_bins = hist.num_value_bins();
  const BinStats& missing = hist.missing();
  const int directions = missing.count > 0 ? 2 : 1;
  bool stopped[2] = {false, false};
  BinStats cum;
  for (std::uint32_t t = 0; t + 1 < value_bins; ++t) {
    cum += hist.bins[t];
    for (int d = 0; d < directions; ++d) {
      if (stopped[d]) continue;
      BinStats left = cum;
      if (d == 1) left += missing;
      if (left.count < min_data_in_leaf) continue;
      const BinStats right = node.totals - left;
      if (right.count < min_data_in_leaf) {
        stopped[d] = true;
        continue;
      }
      visit(Boundary{t, d == 1, left, right});
    }
  }
}

SplitCandidate numeric_candidate(const FeatureHistogram& hist, const Boundary& b,
                                 double gain) {
  SplitCandidate c;
  c.feature = hist.feature;
  c.categorical = false;
  c.threshold_bin = b.bin;
  c.gain = gain;
  c.left = b.left;
  c.right = b.right;
  c.n_left = b.left.count;
  c.n_right = b.right.count;
  // Without missing rows at training time, unseen missing values follow the
  // larger child.
  c.default_left = hist.missing().count > 0 ? b.missing_left : c.n_left >= c.n_right;
  return c;
}

std::size_t min_leaf(const Params& p) {
  return static_cast<std::size_t>(std::max(p.min_data_in_leaf, 1));
}

}  // namespace

double variance_gain(const BinStats& left, const BinStats& right) {
  const double n = static_cast<double>(left.count + right.count);
  if (left.count == 0 || right.count == 0) return 0.0;
  const double l = left.sum_grad * left.sum_grad / static_cast<double>(left.count);
  const double r = right.sum_grad * right.sum_grad / static_cast<double>(right.count);
  return (l + r) / n;
}

double hessian_children_score(const BinStats& left, const BinStats& right, double l2) {
  return leaf_score(left.sum_grad, left.sum_hess + l2) +
         leaf_score(right.sum_grad, right.sum_hess + l2);
}

double split_gain(const BinStats& left, const BinStats& right, GainForm form, double l2) {
  BinStats parent = left;
  parent += right;
  if (form == GainForm::kHessian) {
    return hessian_children_score(left, right, l2) -
           leaf_score(parent.sum_grad, parent.sum_hess + l2);
  }
  if (parent.count == 0) return 0.0;
  const double mean = parent.sum_grad / static_cast<double>(parent.count);
  return variance_gain(left, right) - mean * mean;
}

NodeStats make_node_stats(std::span<const std::size_t> rows,
                          std::span<const GradientPair> grads) {
  NodeStats node{rows, {}};
  for (auto r : rows) {
    node.totals.sum_grad += grads[r].grad;
    node.totals.sum_hess += grads[r].hess;
  }
  node.totals.count = rows.size();
  return node;
}

FeatureHistogram build_histogram(const BinnedDataset& bds, std::size_t feature,
                                 const NodeStats& node,
                                 std::span<const GradientPair> grads) {
  FeatureHistogram hist;
  hist.feature = feature;
  hist.kind = bds.binnings[feature].kind;
  hist.bins.assign(bds.binnings[feature].num_bins(), BinStats{});
  const auto& column = bds.bins[feature];
  for (auto r : node.rows) {
    auto& b = hist.bins[column[r]];
    b.sum_grad += grads[r].grad;
    b.sum_hess += grads[r].hess;
    ++b.count;
  }
  return hist;
}

std::optional<SplitCandidate> find_best_split(const FeatureHistogram& hist,
                                              const NodeStats& node,
                                              const Params& params) {
  if (hist.kind == FeatureKind::kCategorical) return categorical_split(hist, node, params);
  std::optional<SplitCandidate> best;
  std::size_t evaluated = 0;
  scan_numeric(hist, node, min_leaf(params), [&](const Boundary& b) {
    ++evaluated;
    const double gain = split_gain(b.left, b.right, params.gain_form);
    if (better(best, gain)) best = numeric_candidate(hist, b, gain);
  });
  if (!best || !acceptable(best->gain)) return std::nullopt;
  best->candidates_evaluated = evaluated;
  return best;
}

std::optional<SplitCandidate> extra_random_split(const FeatureHistogram& hist,
                                                 const NodeStats& node,
                                                 const Params& params, Rng& rng) {
  if (hist.kind == FeatureKind::kCategorical) {
    return categorical_split(hist, node, params, &rng);
  }
  std::vector<std::uint32_t> admissible;
  scan_numeric(hist, node, min_leaf(params), [&](const Boundary& b) {
    if (admissible.empty() || admissible.back() != b.bin) admissible.push_back(b.bin);
  });
  if (admissible.empty()) return std::nullopt;
  std::uniform_int_distribution<std::size_t> pick(0, admissible.size() - 1);
  const std::uint32_t chosen = admissible[pick(rng)];

  std::optional<SplitCandidate> best;
  std::size_t evaluated = 0;
  scan_numeric(hist, node, min_leaf(params), [&](const Boundary& b) {
    if (b.bin != chosen) return;
    ++evaluated;
    const double gain = split_gain(b.left, b.right, params.gain_form);
    if (better(best, gain)) best = numeric_candidate(hist, b, gain);
  });
  if (!best || !acceptable(best->gain)) return std::nullopt;
  best->candidates_evaluated = evaluated;
  return best;
}

std::vector<std::uint32_t> categorical_order(const FeatureHistogram& hist,
                                             const Params& params) {
  std::vector<std::uint32_t> order;
  const auto min_group = static_cast<std::size_t>(std::max(params.min_data_per_group, 1));
  for (std::uint32_t b = 0; b < hist.num_value_bins(); ++b) {
    if (hist.bins[b].count >= min_group) order.push_back(b);
  }
  auto score = [&](std::uint32_t b) {
    const auto& s = hist.bins[b];
    return s.sum_grad / (s.sum_hess + params.cat_smooth);
  };
  std::stable_sort(order.begin(), order.end(),
                   [&](std::uint32_t a, std::uint32_t b) { return score(a) < score(b); });
  return order;
}

std::optional<SplitCandidate> categorical_split(const FeatureHistogram& hist,
                                                const NodeStats& node,
                                                const Params& params, Rng* rng) {
  const std::size_t min_data = min_leaf(params);

  struct Option {
    std::vector<std::uint32_t> left_bins;
    BinStats left;
  };
  std::vector<Option> options;
  double l2 = 0.0;

  std::vector<std::uint32_t> present;
  for (std::uint32_t b = 0; b < hist.num_value_bins(); ++b) {
    if (hist.bins[b].count > 0) present.push_back(b);
  }
  if (present.size() <= static_cast<std::size_t>(std::max(params.max_cat_to_onehot, 0))) {
    for (auto b : present) options.push_back({{b}, hist.bins[b]});
  } else {
    l2 = params.cat_l2;
    const auto order = categorical_order(hist, params);
    Option prefix;
    for (auto b : order) {
      prefix.left_bins.push_back(b);
      prefix.left += hist.bins[b];
      options.push_back(prefix);
    }
  }

  // Gate, identical to the numeric scan.
  std::vector<std::size_t> admissible;
  for (std::size_t i = 0; i < options.size(); ++i) {
    const std::size_t n_left = options[i].left.count;
    if (n_left >= min_data && node.n() - n_left >= min_data) admissible.push_back(i);
  }
  if (admissible.empty()) return std::nullopt;
  if (rng != nullptr) {
    std::uniform_int_distribution<std::size_t> pick(0, admissible.size() - 1);
    admissible = {admissible[pick(*rng)]};
  }

  std::optional<SplitCandidate> best;
  for (auto i : admissible) {
    const BinStats& left = options[i].left;
    const BinStats right = node.totals - left;
    const double gain = split_gain(left, right, params.gain_form, l2);
    if (!better(best, gain)) continue;
    SplitCandidate c;
    c.feature = hist.feature;
    c.categorical = true;
    c.left_bins = options[i].left_bins;
    std::sort(c.left_bins.begin(), c.left_bins.end());
    c.default_left = false;
    c.gain = gain;
    c.left = left;
    c.right = right;
    c.n_left = left.count;
    c.n_right = right.count;
    best = std::move(c);
  }
  if (!best || !acceptable(best->gain)) return std::nullopt;
  best->candidates_evaluated = admissible.size();
  return best;
}

std::optional<SplitCandidate> find_node_split(const BinnedDataset& bds,
                                              const NodeStats& node,
                                              std::span<const GradientPair> grads,
                                              std::span<const std::size_t> features,
                                              const Params& params, Rng& rng) {
  std::optional<SplitCandidate> best;
  for (auto f : features) {
    const FeatureHistogram hist = build_histogram(bds, f, node, grads);
    std::optional<SplitCandidate> c;
    if (hist.kind == FeatureKind::kCategorical) {
      c = categorical_split(hist, node, params, params.extra_trees ? &rng : nullptr);
    } else if (params.extra_trees) {
      c = extra_random_split(hist, node, params, rng);
    } else {
      c = find_best_split(hist, node, params);
    }
    if (c && better(best, c->gain)) best = std::move(c);
  }
  return best;
}

// -- Tree --------------------------------------------------------------------

double leaf_value(const BinStats& stats) {
  if (!(stats.sum_hess > 0.0)) return 0.0;
  return std::clamp(-stats.sum_grad / stats.sum_hess, -kLeafValueClamp, kLeafValueClamp);
}

bool TreeNode::goes_left(std::uint32_t bin) const {
  if (bin == missing_bin) return default_left;
  if (categorical) return std::binary_search(left_bins.begin(), left_bins.end(), bin);
  return bin <= threshold_bin;
}

Tree::Tree(std::vector<TreeNode> nodes) : nodes_(std::move(nodes)) {
  if (nodes_.empty()) throw ValidationError("tree has no nodes");
  for (const auto& n : nodes_) {
    if (n.is_leaf) continue;
    const auto size = static_cast<std::int32_t>(nodes_.size());
    if (n.left <= 0 || n.right <= 0 || n.left >= size || n.right >= size) {
      throw ValidationError("tree node has invalid children");
    }
  }
}

std::size_t Tree::num_leaves() const {
  return static_cast<std::size_t>(
      std::count_if(nodes_.begin(), nodes_.end(), [](const TreeNode& n) { return n.is_leaf; }));
}

namespace {

nlohmann::json node_to_json(std::span<const TreeNode> nodes, std::size_t i) {
  const TreeNode& n = nodes[i];
  if (n.is_leaf) return {{"leaf_value", n.value}, {"count", n.count}};
  nlohmann::json j{{"feature", n.feature},
                   {"default_left", n.default_left},
                   {"missing_bin", n.missing_bin},
                   {"gain", n.gain},
                   {"count", n.count},
                   {"value", n.value}};
  if (n.categorical) {
    j["left_bins"] = n.left_bins;
  } else {
    j["threshold_bin"] = n.threshold_bin;
  }
  j["left"] = node_to_json(nodes, static_cast<std::size_t>(n.left));
  j["right"] = node_to_json(nodes, static_cast<std::size_t>(n.right));
  return j;
}

std::int32_t node_from_json(const nlohmann::json& j, std::vector<TreeNode>& out) {
  const auto index = static_cast<std::int32_t>(out.size());
  out.emplace_back();
  TreeNode n;
  n.count = j.at("count").get<std::size_t>();
  if (j.contains("leaf_value")) {
    n.is_leaf = true;
    n.value = j.at("leaf_value").get<double>();
    out[static_cast<std::size_t>(index)] = std::move(n);
    return index;
  }
  n.is_leaf = false;
  n.feature = j.at("feature").get<std::uint32_t>();
  n.default_left = j.at("default_left").get<bool>();
  n.missing_bin = j.at("missing_bin").get<std::uint32_t>();
  n.gain = j.at("gain").get<double>();
  n.value = j.at("value").get<double>();
  if (j.contains("left_bins")) {
    n.categorical = true;
    n.left_bins = j.at("left_bins").get<std::vector<std::uint32_t>>();
  } else {
    n.threshold_bin = j.at("threshold_bin").get<std::uint32_t>();
  }
  n.left = node_from_json(j.at("left"), out);
  n.right = node_from_json(j.at("right"), out);
  out[static_cast<std::size_t>(index)] = std::move(n);
  return index;
}

}  // namespace

void Tree::to_json(nlohmann::json& j) const { j = node_to_json(nodes_, 0); }

Tree Tree::from_json(const nlohmann::json& j) {
  std::vector<TreeNode> nodes;
  node_from_json(j, nodes);
  return Tree(std::move(nodes));
}

Tree grow_tree(const BinnedDataset& bds, std::span<const GradientPair> grads,
               std::span<const std::size_t> rows,
               std::span<const std::size_t> feature_subset, const Params& params,
               Rng& rng) {
  if (rows.empty()) throw ValidationError("grow_tree needs at least one row");
  std::vector<std::size_t> features(feature_subset.begin(), feature_subset.end());
  std::sort(features.begin(), features.end());

  std::vector<std::size_t> index(rows.begin(), rows.end());
  std::vector<TreeNode> nodes;

  // Rows of leaf `node` occupy index[begin, end).
  struct Leaf {
    std::size_t node;
    std::size_t begin;
    std::size_t end;
    std::optional<SplitCandidate> split;
  };
  std::vector<Leaf> leaves;

  auto add_leaf = [&](std::size_t begin, std::size_t end) {
    const std::span<const std::size_t> leaf_rows(index.data() + begin, end - begin);
    const NodeStats stats = make_node_stats(leaf_rows, grads);
    TreeNode n;
    n.value = leaf_value(stats.totals);
    n.count = stats.n();
    nodes.push_back(std::move(n));
    leaves.push_back({nodes.size() - 1, begin, end,
                      find_node_split(bds, stats, grads, features, params, rng)});
  };

  add_leaf(0, index.size());
  const auto max_leaves = static_cast<std::size_t>(std::max(params.num_leaves, 1));
  while (leaves.size() < max_leaves) {
    std::size_t pick = leaves.size();
    for (std::size_t i = 0; i < leaves.size(); ++i) {
      if (!leaves[i].split) continue;
      if (pick == leaves.size() || leaves[i].split->gain > leaves[pick].split->gain ||
          (leaves[i].split->gain == leaves[pick].split->gain &&
           leaves[i].node < leaves[pick].node)) {
        pick = i;
      }
    }
    if (pick == leaves.size()) break;

    Leaf leaf = std::move(leaves[pick]);
    leaves.erase(leaves.begin() + static_cast<std::ptrdiff_t>(pick));
    const SplitCandidate s = leaf.split.value();

    TreeNode& parent = nodes[leaf.node];
    parent.is_leaf = false;
    parent.feature = static_cast<std::uint32_t>(s.feature);
    parent.categorical = s.categorical;
    parent.threshold_bin = s.threshold_bin;
    parent.left_bins = s.left_bins;
    parent.default_left = s.default_left;
    parent.missing_bin = bds.binnings[s.feature].missing_bin();
    parent.gain = s.gain;

    const TreeNode routing = parent;
    const auto& column = bds.bins[s.feature];
    const auto mid = std::stable_partition(
        index.begin() + static_cast<std::ptrdiff_t>(leaf.begin),
        index.begin() + static_cast<std::ptrdiff_t>(leaf.end),
        [&](std::size_t r) { return routing.goes_left(column[r]); });
    const auto split_at = static_cast<std::size_t>(mid - index.begin());

    const std::size_t parent_id = leaf.node;
    add_leaf(leaf.begin, split_at);
    nodes[parent_id].left = static_cast<std::int32_t>(nodes.size() - 1);
    add_leaf(split_at, leaf.end);
    nodes[parent_id].right = static_cast<std::int32_t>(nodes.size() - 1);
  }
  return Tree(std::move(nodes));
}

}  // namespace fewboost
