// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <vector>

#include "emitter/nn/layers.hpp"

namespace emitter::nn {

struct ClassWeights {
  std::vector<double> w;

  std::size_t size() const { return w.size(); }
  double operator[](std::size_t c) const { return w[c]; }
  static ClassWeights uniform(std::size_t classes) { return {std::vector<double>(classes, 1.0)}; }
};

// Median frequency balancing: w_c = median_k(freq_k) / freq_c with
// freq_c = N_c / N. Evaluated as median(N_k) / N_c, which is the same ratio
// without the intermediate division by N.
inline ClassWeights median_frequency_weights(std::span<const std::size_t> class_counts) {
  if (class_counts.empty()) throw ConfigError("no classes given");
  std::vector<double> sorted;
  for (auto n : class_counts) {
    if (n == 0) throw ConfigError("median frequency weights need every class to be present");
    sorted.push_back(static_cast<double>(n));
  }
  std::sort(sorted.begin(), sorted.end());
  const auto k = sorted.size();
  const double median = k % 2 ? sorted[k / 2] : 0.5 * (sorted[k / 2 - 1] + sorted[k / 2]);
  ClassWeights out;
  for (auto n : class_counts) out.w.push_back(median / static_cast<double>(n));
  return out;
}

inline constexpr double kLogFloor = 1e-12;

// L = -(1/W) sum_i w_{y_i} log p_{i,y_i},  W = sum_i w_{y_i}.
inline double weighted_cross_entropy(const Matrix& probs, std::span<const std::size_t> labels,
                                     const ClassWeights& weights) {
  double num = 0.0, total = 0.0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const double w = weights[labels[i]];
    num -= w * std::log(std::max(probs(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(labels[i])), kLogFloor));
    total += w;
  }
  return total > 0.0 ? num / total : 0.0;
}

struct LossAndGradient {
  double loss = 0.0;
  Matrix d_logits;  // gradient with respect to the pre-softmax scores
};

// Softmax followed by weighted cross-entropy; the gradient with respect to the
// logits of row i is (w_{y_i} / W) * (p_i - onehot(y_i)).
inline LossAndGradient softmax_weighted_cross_entropy(const Matrix& logits, std::span<const std::size_t> labels,
                                                      const ClassWeights& weights) {
  if (static_cast<std::size_t>(logits.rows()) != labels.size()) throw ConfigError("label count mismatch");
  LossAndGradient out;
  Matrix probs = softmax(logits);
  out.loss = weighted_cross_entropy(probs, labels, weights);
  double total = 0.0;
  for (auto y : labels) total += weights[y];
  out.d_logits = probs;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const auto r = static_cast<Eigen::Index>(i);
    out.d_logits(r, static_cast<Eigen::Index>(labels[i])) -= 1.0;
    out.d_logits.row(r) *= weights[labels[i]] / total;
  }
  return out;
}

}  // namespace emitter::nn
