#include "dalkit/dal.hpp"

#include <algorithm>
#include <cmath>

namespace dalkit {

namespace {

void require_valid_blocks(const Tensor& x_s, const Tensor& x_t) {
  if (x_s.channels() != x_t.channels())
    throw DimensionError("source and target channel extents differ");
}

/// (x - mu[c]) / sqrt(eps + var[c]) per channel.
Tensor normalize_block(const Tensor& x, const Eigen::ArrayXd& mu,
                       const Eigen::ArrayXd& var, double eps) {
  Tensor y(x.shape());
  for (Index c = 0; c < x.channels(); ++c) {
    const double inv_std = 1.0 / std::sqrt(eps + var[c]);
    set_channel_values(y, c, (channel_values(x, c) - mu[c]) * inv_std);
  }
  return y;
}

}  // namespace

DaLayerState DaLayerState::make(Index channels, double alpha, double eps,
                                double momentum_ma) {
  if (channels < 1) throw DimensionError("layer needs at least one channel");
  if (eps < 0.0) throw ValueError("eps must be non-negative");
  if (momentum_ma <= 0.0 || momentum_ma > 1.0)
    throw ValueError("moving-average momentum must lie in (0, 1]");
  DaLayerState s;
  s.alpha = alpha;
  s.channels = channels;
  s.moving_mu_s = Eigen::ArrayXd::Zero(channels);
  s.moving_var_s = Eigen::ArrayXd::Ones(channels);
  s.moving_mu_t = Eigen::ArrayXd::Zero(channels);
  s.moving_var_t = Eigen::ArrayXd::Ones(channels);
  s.momentum_ma = momentum_ma;
  s.eps = eps;
  return s;
}

MixedStats compute_mixed_statistics(const Tensor& x_s, const Tensor& x_t,
                                    double alpha, double eps) {
  require_valid_blocks(x_s, x_t);
  if (x_s.batch() < 1) throw DimensionError("source block is empty");
  if (x_t.batch() < 1) throw DimensionError("target block is empty");
  if (alpha < 0.5 || alpha > 1.0)
    throw ValueError("alpha outside [0.5, 1]");
  if (eps < 0.0) throw ValueError("eps must be non-negative");

  const Index channels = x_s.channels();
  MixedStats stats;
  stats.mu_st.resize(channels);
  stats.var_st.resize(channels);
  stats.mu_ts.resize(channels);
  stats.var_ts.resize(channels);
  stats.eps = eps;
  stats.alpha_used = alpha;

  for (Index c = 0; c < channels; ++c) {
    const Eigen::ArrayXd vs = channel_values(x_s, c);
    const Eigen::ArrayXd vt = channel_values(x_t, c);
    const double mean_s = vs.mean();
    const double mean_t = vt.mean();
    stats.mu_st[c] = alpha * mean_s + (1.0 - alpha) * mean_t;
    stats.mu_ts[c] = (1.0 - alpha) * mean_s + alpha * mean_t;
    stats.var_st[c] = alpha * (vs - stats.mu_st[c]).square().mean() +
                      (1.0 - alpha) * (vt - stats.mu_st[c]).square().mean();
    stats.var_ts[c] = (1.0 - alpha) * (vs - stats.mu_ts[c]).square().mean() +
                      alpha * (vt - stats.mu_ts[c]).square().mean();
  }
  return stats;
}

DaForwardResult da_forward(const Tensor& x_s, const Tensor& x_t,
                           DaLayerState& state) {
  require_valid_blocks(x_s, x_t);
  if (x_s.channels() != state.channels)
    throw DimensionError("input channels do not match layer state");
  clip_alpha(state);

  DaForwardResult out;
  if (state.mode == DaMode::train) {
    out.cache.stats =
        compute_mixed_statistics(x_s, x_t, state.alpha, state.eps);
    update_moving_averages(state, x_s, x_t);
    out.cache.from_train = true;
  } else {
    if (!state.frozen_stats)
      throw StateError("frozen layer has no stored statistics");
    out.cache.stats = *state.frozen_stats;
    out.cache.from_train = false;
  }

  const MixedStats& st = out.cache.stats;
  out.y_s = normalize_block(x_s, st.mu_st, st.var_st, st.eps);
  out.y_t = normalize_block(x_t, st.mu_ts, st.var_ts, st.eps);
  out.cache.y_s = out.y_s;
  out.cache.y_t = out.y_t;
  out.cache.y_st = normalize_block(x_s, st.mu_ts, st.var_ts, st.eps);
  out.cache.y_ts = normalize_block(x_t, st.mu_st, st.var_st, st.eps);
  out.cache.count_s = x_s.batch() * x_s.spatial();
  out.cache.count_t = x_t.batch() * x_t.spatial();
  return out;
}

DaBackwardResult da_backward(const DaCache& cache, const Tensor& g_s,
                             const Tensor& g_t) {
  if (!cache.from_train)
    throw StateError("backward requires a TRAIN-mode forward cache");
  if (!g_s.same_shape(cache.y_s) || !g_t.same_shape(cache.y_t))
    throw DimensionError("upstream gradient shapes do not match cache");

  const MixedStats& st = cache.stats;
  const double alpha = st.alpha_used;
  const double n_s = static_cast<double>(cache.count_s);
  const double n_t = static_cast<double>(cache.count_t);

  DaBackwardResult out;
  out.dx_s = Tensor(g_s.shape());
  out.dx_t = Tensor(g_t.shape());
  out.d_alpha = 0.0;

  for (Index c = 0; c < st.channels(); ++c) {
    const Eigen::ArrayXd ys = channel_values(cache.y_s, c);
    const Eigen::ArrayXd yt = channel_values(cache.y_t, c);
    const Eigen::ArrayXd yst = channel_values(cache.y_st, c);
    const Eigen::ArrayXd yts = channel_values(cache.y_ts, c);
    const Eigen::ArrayXd gs = channel_values(g_s, c);
    const Eigen::ArrayXd gt = channel_values(g_t, c);

    const double sum_gs = gs.sum();
    const double sum_ys_gs = (ys * gs).sum();
    const double sum_gt = gt.sum();
    const double sum_yt_gt = (yt * gt).sum();

    const double inv_std_st = 1.0 / std::sqrt(st.eps + st.var_st[c]);
    const double inv_std_ts = 1.0 / std::sqrt(st.eps + st.var_ts[c]);

    // Own-path term is the usual batch-norm input gradient with weight
    // alpha/n; the cross term couples each block to the other path through
    // the cross-normalized outputs with weight (1-alpha)/n.
    set_channel_values(
        out.dx_s, c,
        inv_std_st * (gs - (alpha / n_s) * (sum_gs + ys * sum_ys_gs)) -
            inv_std_ts * ((1.0 - alpha) / n_s) * (sum_gt + yst * sum_yt_gt));
    set_channel_values(
        out.dx_t, c,
        inv_std_ts * (gt - (alpha / n_t) * (sum_gt + yt * sum_yt_gt)) -
            inv_std_st * ((1.0 - alpha) / n_t) * (sum_gs + yts * sum_ys_gs));

    out.d_alpha += (yts.mean() - ys.mean()) * sum_gs +
                   0.5 * (yts.square().mean() - ys.square().mean()) * sum_ys_gs +
                   (yst.mean() - yt.mean()) * sum_gt +
                   0.5 * (yst.square().mean() - yt.square().mean()) * sum_yt_gt;
  }
  return out;
}

void clip_alpha(DaLayerState& state) {
  state.alpha = std::clamp(state.alpha, 0.5, 1.0);
}

void update_moving_averages(DaLayerState& state, const Tensor& x_s,
                            const Tensor& x_t) {
  if (state.mode != DaMode::train)
    throw StateError("moving averages update only in TRAIN mode");
  const double m = state.momentum_ma;
  state.moving_mu_s = (1.0 - m) * state.moving_mu_s +
                      m * reduce_channel(x_s, Reduce::mean);
  state.moving_var_s = (1.0 - m) * state.moving_var_s +
                       m * reduce_channel(x_s, Reduce::var);
  state.moving_mu_t = (1.0 - m) * state.moving_mu_t +
                      m * reduce_channel(x_t, Reduce::mean);
  state.moving_var_t = (1.0 - m) * state.moving_var_t +
                       m * reduce_channel(x_t, Reduce::var);
  ++state.updates;
}

void freeze(DaLayerState& state) {
  if (state.updates == 0)
    throw StateError("freeze requires at least one moving-average update");
  clip_alpha(state);
  const double alpha = state.alpha;

  MixedStats frozen;
  frozen.eps = state.eps;
  frozen.alpha_used = alpha;
  frozen.mu_st = alpha * state.moving_mu_s + (1.0 - alpha) * state.moving_mu_t;
  frozen.mu_ts = (1.0 - alpha) * state.moving_mu_s + alpha * state.moving_mu_t;
  frozen.var_st =
      alpha * (state.moving_var_s + (state.moving_mu_s - frozen.mu_st).square()) +
      (1.0 - alpha) *
          (state.moving_var_t + (state.moving_mu_t - frozen.mu_st).square());
  frozen.var_ts =
      (1.0 - alpha) *
          (state.moving_var_s + (state.moving_mu_s - frozen.mu_ts).square()) +
      alpha * (state.moving_var_t + (state.moving_mu_t - frozen.mu_ts).square());

  state.frozen_stats = std::move(frozen);
  state.mode = DaMode::frozen;
}

}  // namespace dalkit
