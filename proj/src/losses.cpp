#include "dalkit/losses.hpp"

#include <cmath>
#include <string>

namespace dalkit {

namespace {

void require_prob_rows(const Tensor& probs, const char* op) {
  if (probs.rank() != 2)
    throw DimensionError(std::string(op) + ": probabilities must be [n, K]");
  const Index k = probs.extent(1);
  for (Index i = 0; i < probs.batch(); ++i) {
    double row_sum = 0.0;
    for (Index c = 0; c < k; ++c) row_sum += probs(i, c);
    if (std::abs(row_sum - 1.0) > 1e-9)
      throw ValueError(std::string(op) + ": probability row " +
                       std::to_string(i) + " does not sum to 1");
  }
}

double floored(double p) { return p < kProbFloor ? kProbFloor : p; }

}  // namespace

LossGrad source_log_loss(const Tensor& probs, const std::vector<int>& labels) {
  require_prob_rows(probs, "source_log_loss");
  const Index n = probs.batch();
  const Index k = probs.extent(1);
  if (static_cast<Index>(labels.size()) != n)
    throw DimensionError("source_log_loss: one label per row required");

  LossGrad out;
  out.d_probs = Tensor(probs.shape());
  if (n == 0) return out;

  double sum = 0.0;
  for (Index i = 0; i < n; ++i) {
    const int y = labels[static_cast<std::size_t>(i)];
    if (y < 0 || y >= k)
      throw IndexError("source_log_loss: label " + std::to_string(y) +
                       " out of range");
    const double p = floored(probs(i, y));
    sum += std::log(p);
    out.d_probs(i, y) = -1.0 / (static_cast<double>(n) * p);
  }
  out.value = -sum / static_cast<double>(n);
  return out;
}

LossGrad target_entropy_loss(const Tensor& probs) {
  require_prob_rows(probs, "target_entropy_loss");
  const Index m = probs.batch();
  const Index k = probs.extent(1);

  LossGrad out;
  out.d_probs = Tensor(probs.shape());
  if (m == 0) return out;

  double sum = 0.0;
  for (Index i = 0; i < m; ++i) {
    for (Index c = 0; c < k; ++c) {
      const double p = probs(i, c);
      const double log_p = std::log(floored(p));
      sum += p * log_p;
      out.d_probs(i, c) = -(log_p + 1.0) / static_cast<double>(m);
    }
  }
  out.value = -sum / static_cast<double>(m);
  return out;
}

CombinedLossResult combined_loss(const Tensor& probs, Index n_source,
                                 const std::vector<int>& source_labels,
                                 const LossConfig& cfg) {
  if (cfg.lambda < 0.0) throw ValueError("lambda must be non-negative");
  if (cfg.class_count > 0 && probs.extent(1) != cfg.class_count)
    throw DimensionError("combined_loss: probability width != class count");
  if (n_source < 0 || n_source > probs.batch())
    throw DimensionError("combined_loss: source row count out of range");

  const Tensor probs_s = rows(probs, 0, n_source);
  const Tensor probs_t = rows(probs, n_source, probs.batch());

  const LossGrad src = source_log_loss(probs_s, source_labels);
  const LossGrad tgt = target_entropy_loss(probs_t);

  CombinedLossResult out;
  out.value.l_source = src.value;
  out.value.l_target = tgt.value;
  out.value.total = src.value + cfg.lambda * tgt.value;
  out.d_probs = concat_rows(src.d_probs, scale(tgt.d_probs, cfg.lambda));
  return out;
}

}  // namespace dalkit
