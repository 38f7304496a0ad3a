#ifndef DALKIT_DAL_HPP_
#define DALKIT_DAL_HPP_

#include <Eigen/Dense>
#include <optional>

#include "dalkit/tensor.hpp"

namespace dalkit {

/// Per-channel statistics of the two cross-domain mixture distributions.
///
/// With mixing factor alpha, the source path normalizes with the statistics
/// of the mixture alpha*source + (1-alpha)*target (mu_st, var_st) and the
/// target path with the mirrored mixture (mu_ts, var_ts). At alpha = 0.5 the
/// two mixtures coincide; at alpha = 1 each path sees only its own domain.
struct MixedStats {
  Eigen::ArrayXd mu_st;
  Eigen::ArrayXd var_st;
  Eigen::ArrayXd mu_ts;
  Eigen::ArrayXd var_ts;
  double eps = 1e-5;
  double alpha_used = 0.5;

  Index channels() const { return mu_st.size(); }
};

enum class DaMode { train, frozen };

/// State owned by one domain-alignment layer: the learnable mixing factor,
/// separate per-domain moving averages, and (after freezing) the stored
/// normalization constants used for batch-independent inference.
struct DaLayerState {
  double alpha = 0.75;
  Index channels = 0;
  Eigen::ArrayXd moving_mu_s;
  Eigen::ArrayXd moving_var_s;
  Eigen::ArrayXd moving_mu_t;
  Eigen::ArrayXd moving_var_t;
  double momentum_ma = 0.1;
  double eps = 1e-5;
  DaMode mode = DaMode::train;
  std::optional<MixedStats> frozen_stats;
  long updates = 0;

  static DaLayerState make(Index channels, double alpha = 0.75,
                           double eps = 1e-5, double momentum_ma = 0.1);
};

/// Everything the backward pass needs. Holds only normalized and
/// cross-normalized outputs plus the statistics; raw layer inputs are not
/// kept, so the forward buffers may be overwritten in place by callers.
struct DaCache {
  Tensor y_s;   // source block under the source-path statistics
  Tensor y_t;   // target block under the target-path statistics
  Tensor y_st;  // source block under the target-path statistics
  Tensor y_ts;  // target block under the source-path statistics
  MixedStats stats;
  Index count_s = 0;  // per-channel element count of the source block
  Index count_t = 0;
  bool from_train = false;
};

struct DaForwardResult {
  Tensor y_s;
  Tensor y_t;
  DaCache cache;
};

struct DaBackwardResult {
  Tensor dx_s;
  Tensor dx_t;
  double d_alpha = 0.0;
};

/// Mixture statistics of one batch, pooling batch and spatial axes per
/// channel. The mixture mean weights each domain's per-channel average by
/// alpha / (1-alpha); the mixture variance averages squared deviations from
/// the mixed mean with the same weights.
MixedStats compute_mixed_statistics(const Tensor& x_s, const Tensor& x_t,
                                    double alpha, double eps);

/// Normalizes the source and target blocks along their respective mixture
/// statistics. TRAIN mode estimates statistics from the batch and updates
/// the per-domain moving averages; FROZEN mode applies the stored statistics
/// and accepts empty blocks.
DaForwardResult da_forward(const Tensor& x_s, const Tensor& x_t,
                           DaLayerState& state);

/// Gradients of the loss w.r.t. both input blocks and the mixing factor,
/// given upstream gradients w.r.t. the normalized outputs. Requires a cache
/// produced by a TRAIN-mode forward. d_alpha is accumulated over all
/// channels and positions (one shared scalar per layer).
DaBackwardResult da_backward(const DaCache& cache, const Tensor& g_s,
                             const Tensor& g_t);

/// Projects alpha back into [0.5, 1]; applied at the start of every forward
/// pass and after every optimizer step.
void clip_alpha(DaLayerState& state);

/// Exponential moving averages of the plain per-domain batch statistics
/// (not the mixed ones): at inference each predictor normalizes its own
/// domain's fixed distribution.
void update_moving_averages(DaLayerState& state, const Tensor& x_s,
                            const Tensor& x_t);

/// Switches the layer to FROZEN mode, assembling the stored normalization
/// constants by mixing the per-domain moving statistics with the learned
/// alpha. Mixed means combine exactly; mixed variances follow the law of
/// total variance around the mixed mean.
void freeze(DaLayerState& state);

}  // namespace dalkit

#endif  // DALKIT_DAL_HPP_
