#pragma once

// Independent reference implementations used to check the library.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "fewboost/dataset.hpp"
#include "fewboost/params.hpp"

namespace oracle {

struct Split {
  std::size_t feature = 0;
  std::uint32_t boundary = 0;
  bool missing_left = false;
  double gain = 0.0;
  std::size_t n_left = 0;
  std::size_t n_right = 0;
};

inline double gain_of(double gl, double hl, double nl, double gr, double hr, double nr,
                      fewboost::GainForm form) {
  if (form == fewboost::GainForm::kVariance) {
    const double n = nl + nr;
    const double g = gl + gr;
    return (gl * gl / nl + gr * gr / nr) / n - (g / n) * (g / n);
  }
  auto part = [](double g, double h) { return h > 0.0 ? g * g / h : 0.0; };
  return part(gl, hl) + part(gr, hr) - part(gl + gr, hl + hr);
}

// Every (feature, boundary, missing side) is partitioned from scratch over the
// raw rows. Ties keep the first candidate in (feature, boundary, right-first)
// order; only strictly positive gains count.
inline std::optional<Split> best_numeric_split(const fewboost::BinnedDataset& bds,
                                               std::span<const std::size_t> rows,
                                               std::span<const fewboost::GradientPair> grads,
                                               std::span<const std::size_t> features,
                                               std::size_t min_leaf, fewboost::GainForm form) {
  std::optional<Split> best;
  for (auto f : features) {
    const std::uint32_t value_bins = bds.binnings[f].num_value_bins;
    const std::uint32_t missing = bds.binnings[f].missing_bin();
    bool has_missing = false;
    for (auto r : rows) has_missing = has_missing || bds.bins[f][r] == missing;
    for (std::uint32_t t = 0; t + 1 < value_bins; ++t) {
      for (int side = 0; side < (has_missing ? 2 : 1); ++side) {
        double gl = 0, hl = 0, gr = 0, hr = 0;
        std::size_t nl = 0, nr = 0;
        for (auto r : rows) {
          const auto b = bds.bins[f][r];
          const bool left = b == missing ? side == 1 : b <= t;
          if (left) {
            gl += grads[r].grad;
            hl += grads[r].hess;
            ++nl;
          } else {
            gr += grads[r].grad;
            hr += grads[r].hess;
            ++nr;
          }
        }
        if (nl < min_leaf || nr < min_leaf) continue;
        const double g = gain_of(gl, hl, double(nl), gr, hr, double(nr), form);
        if (!(g > 0.0)) continue;
        if (!best || g > best->gain) best = Split{f, t, side == 1, g, nl, nr};
      }
    }
  }
  return best;
}

// True iff some boundary leaves at least min_leaf rows on both sides.
inline bool any_admissible(const std::vector<std::size_t>& bin_counts, std::size_t missing_count,
                           std::size_t min_leaf) {
  std::size_t total = missing_count;
  for (auto c : bin_counts) total += c;
  for (std::size_t t = 0; t + 1 < bin_counts.size(); ++t) {
    std::size_t left = 0;
    for (std::size_t b = 0; b <= t; ++b) left += bin_counts[b];
    for (std::size_t extra : {std::size_t{0}, missing_count}) {
      if (left + extra >= min_leaf && total - left - extra >= min_leaf) return true;
    }
  }
  return false;
}

// O(P * N) pair count with ties at one half.
inline double pairwise_auc(std::span<const double> labels, std::span<const double> scores) {
  double wins = 0.0;
  double pairs = 0.0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] != 1.0) continue;
    for (std::size_t j = 0; j < labels.size(); ++j) {
      if (labels[j] != 0.0) continue;
      pairs += 1.0;
      if (scores[i] > scores[j]) {
        wins += 1.0;
      } else if (scores[i] == scores[j]) {
        wins += 0.5;
      }
    }
  }
  return wins / pairs;
}

// Sorted-array walk: each bin takes whole runs of equal values until it holds
// max(min_data_in_bin, ceil(remaining / bins_remaining)) rows; a final bin
// smaller than min_data_in_bin joins its predecessor. Returns row counts.
inline std::vector<std::size_t> equal_frequency_counts(std::vector<double> values,
                                                       std::size_t max_bin,
                                                       std::size_t min_data_in_bin) {
  std::sort(values.begin(), values.end());
  std::vector<std::size_t> counts;
  std::size_t pos = 0;
  while (pos < values.size()) {
    const std::size_t remaining = values.size() - pos;
    const std::size_t slots = max_bin - counts.size();
    const std::size_t want = std::max(min_data_in_bin, (remaining + slots - 1) / slots);
    std::size_t end = pos;
    while (end < values.size() && end - pos < want) {
      const double v = values[end];
      while (end < values.size() && values[end] == v) ++end;
    }
    counts.push_back(end - pos);
    pos = end;
  }
  if (counts.size() > 1 && counts.back() < min_data_in_bin) {
    counts[counts.size() - 2] += counts.back();
    counts.pop_back();
  }
  return counts;
}

// Linear interpolation between closest ranks, as in numpy's default.
inline double quantile(std::vector<double> v, double q) {
  std::sort(v.begin(), v.end());
  const double pos = q * double(v.size() - 1);
  const auto below = static_cast<std::size_t>(pos);
  const auto above = std::min(below + 1, v.size() - 1);
  const double w = pos - double(below);
  return (1.0 - w) * v[below] + w * v[above];
}

}  // namespace oracle
