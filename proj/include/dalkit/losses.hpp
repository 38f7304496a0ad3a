#ifndef DALKIT_LOSSES_HPP_
#define DALKIT_LOSSES_HPP_

#include <vector>

#include "dalkit/tensor.hpp"

namespace dalkit {

/// Probabilities are floored at this constant before any logarithm.
inline constexpr double kProbFloor = 1e-12;

struct LossConfig {
  double lambda = 0.0;  // weight of the target entropy term; 0 disables it
  Index class_count = 0;
};

struct LossValue {
  double l_source = 0.0;  // mean negative log-probability of the true labels
  double l_target = 0.0;  // mean prediction entropy on the target block
  double total = 0.0;     // l_source + lambda * l_target
};

struct LossGrad {
  double value = 0.0;
  Tensor d_probs;
};

struct CombinedLossResult {
  LossValue value;
  Tensor d_probs;  // gradient of total w.r.t. every probability row
};

/// Mean negative log-probability of the labeled rows:
/// value = -(1/n) sum_i ln p[i, y_i]. The gradient is nonzero only at the
/// true-label entries: d[i, y_i] = -1 / (n * p[i, y_i]).
LossGrad source_log_loss(const Tensor& probs, const std::vector<int>& labels);

/// Mean prediction entropy: value = -(1/m) sum_i sum_y p ln p, bounded by
/// [0, ln K]. d[i, y] = -(1/m) (ln p[i, y] + 1), evaluated at the floored
/// probability.
LossGrad target_entropy_loss(const Tensor& probs);

/// Source log-loss on rows [0, n_source) plus lambda times the entropy of
/// the remaining target rows. An empty target block contributes zero.
CombinedLossResult combined_loss(const Tensor& probs, Index n_source,
                                 const std::vector<int>& source_labels,
                                 const LossConfig& cfg);

}  // namespace dalkit

#endif  // DALKIT_LOSSES_HPP_
