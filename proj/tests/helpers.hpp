#ifndef DALKIT_TESTS_HELPERS_HPP_
#define DALKIT_TESTS_HELPERS_HPP_

#include <algorithm>
#include <random>
#include <vector>

#include "dalkit/dal.hpp"
#include "dalkit/oracle.hpp"
#include "dalkit/tensor.hpp"

namespace dalkit::testing {

inline Tensor random_tensor(Tensor::Shape shape, std::mt19937_64& rng,
                            double stddev = 1.0, double mean = 0.0) {
  Index n = 1;
  for (Index e : shape) n *= e;
  std::normal_distribution<double> dist(mean, stddev);
  Eigen::ArrayXd data(n);
  for (Index i = 0; i < n; ++i) data[i] = dist(rng);
  return {std::move(shape), std::move(data)};
}

/// Scalar test functional L = sum(w_s y_s) + sum(w_t y_t): fixed random
/// upstream gradients, generic enough to exercise every backward term.
struct LinearProbe {
  Tensor w_s, w_t;

  static LinearProbe make(const Tensor::Shape& shape_s,
                          const Tensor::Shape& shape_t, std::mt19937_64& rng) {
    return {random_tensor(shape_s, rng), random_tensor(shape_t, rng)};
  }

  double loss(const Tensor& y_s, const Tensor& y_t) const {
    return (w_s.array() * y_s.array()).sum() +
           (w_t.array() * y_t.array()).sum();
  }
  Tensor grad_s(const Tensor&) const { return w_s; }
  Tensor grad_t(const Tensor&) const { return w_t; }
};

/// Quadratic variant whose upstream gradients depend on the outputs,
/// L = sum(w y) + 0.5 sum(v y^2) per block.
struct QuadraticProbe {
  Tensor w_s, v_s, w_t, v_t;

  static QuadraticProbe make(const Tensor::Shape& shape_s,
                             const Tensor::Shape& shape_t,
                             std::mt19937_64& rng) {
    return {random_tensor(shape_s, rng), random_tensor(shape_s, rng),
            random_tensor(shape_t, rng), random_tensor(shape_t, rng)};
  }

  double loss(const Tensor& y_s, const Tensor& y_t) const {
    return (w_s.array() * y_s.array()).sum() +
           0.5 * (v_s.array() * y_s.array().square()).sum() +
           (w_t.array() * y_t.array()).sum() +
           0.5 * (v_t.array() * y_t.array().square()).sum();
  }
  Tensor grad_s(const Tensor& y_s) const {
    return {y_s.shape(), w_s.array() + v_s.array() * y_s.array()};
  }
  Tensor grad_t(const Tensor& y_t) const {
    return {y_t.shape(), w_t.array() + v_t.array() * y_t.array()};
  }
};

/// Probe loss after a fresh TRAIN-mode forward through the real layer.
template <typename Probe>
double da_probe_loss(const Tensor& x_s, const Tensor& x_t, double alpha,
                     double eps, const Probe& probe) {
  DaLayerState state = DaLayerState::make(x_s.channels(), alpha, eps);
  DaForwardResult res = da_forward(x_s, x_t, state);
  return probe.loss(res.y_s, res.y_t);
}

/// Transliteration of the mixture normalization without the
/// admissible-range guard: the loss is a smooth function of alpha slightly
/// beyond [0.5, 1], so boundary derivatives can be probed with ordinary
/// central differences. Agrees with da_probe_loss at interior alpha.
template <typename Probe>
double da_probe_loss_extended(const Tensor& x_s, const Tensor& x_t,
                              double alpha, double eps, const Probe& probe) {
  Tensor y_s(x_s.shape()), y_t(x_t.shape());
  for (Index c = 0; c < x_s.channels(); ++c) {
    const Eigen::ArrayXd vs = channel_values(x_s, c);
    const Eigen::ArrayXd vt = channel_values(x_t, c);
    const double ms = vs.mean(), mt = vt.mean();
    const double mu_st = alpha * ms + (1.0 - alpha) * mt;
    const double mu_ts = (1.0 - alpha) * ms + alpha * mt;
    const double var_st = alpha * (vs - mu_st).square().mean() +
                          (1.0 - alpha) * (vt - mu_st).square().mean();
    const double var_ts = (1.0 - alpha) * (vs - mu_ts).square().mean() +
                          alpha * (vt - mu_ts).square().mean();
    set_channel_values(y_s, c, (vs - mu_st) / std::sqrt(eps + var_st));
    set_channel_values(y_t, c, (vt - mu_ts) / std::sqrt(eps + var_ts));
  }
  return probe.loss(y_s, y_t);
}

struct FdSweepStats {
  long checked = 0;
  long refined = 0;
  long failed = 0;
  double worst = 0.0;

  void absorb(const FdSweepStats& other) {
    checked += other.checked;
    refined += other.refined;
    failed += other.failed;
    worst = std::max(worst, other.worst);
  }
};

/// Central differences carry two error regimes: h^2 truncation, dominating
/// for ill-conditioned mixtures (near-zero block variances), and round-off
/// ~ eps |f| / h, dominating on near-zero gradient components. A single
/// step cannot certify both, so components that miss the tolerance at the
/// default step are re-examined with Richardson-extrapolated central
/// differences (O(h^4) truncation at a base step large enough to sit far
/// above the noise floor). The tolerance itself never changes.
template <typename Diff>
double fd_component_error(double analytic, Diff&& d, double rel_tol,
                          double base_step, std::initializer_list<double> bases,
                          FdSweepStats& stats) {
  double err = relative_error(analytic, d(base_step));
  if (err > rel_tol) {
    ++stats.refined;
    auto consider = [&](double estimate) {
      if (std::isfinite(estimate))
        err = std::min(err, relative_error(analytic, estimate));
    };
    for (double b : bases) {
      const double d1 = d(b);
      const double d2 = d(b / 2.0);
      const double d4 = d(b / 4.0);
      const double r1 = (4.0 * d2 - d1) / 3.0;
      const double r1_half = (4.0 * d4 - d2) / 3.0;
      consider(d1);
      consider(r1);
      consider((16.0 * r1_half - r1) / 15.0);
    }
  }
  ++stats.checked;
  if (err > rel_tol) ++stats.failed;
  stats.worst = std::max(stats.worst, err);
  return err;
}

/// Full finite-difference certification of da_backward for one case:
/// every entry of dx_s and dx_t plus d_alpha.
template <typename Probe>
FdSweepStats da_fd_case_check(const Tensor& x_s, const Tensor& x_t,
                              double alpha, double eps, const Probe& probe,
                              double rel_tol = 1e-5) {
  FdSweepStats stats;
  DaLayerState state = DaLayerState::make(x_s.channels(), alpha, eps);
  const DaForwardResult res = da_forward(x_s, x_t, state);
  const DaBackwardResult back =
      da_backward(res.cache, probe.grad_s(res.y_s), probe.grad_t(res.y_t));

  for (int domain = 0; domain < 2; ++domain) {
    const Tensor& x = domain == 0 ? x_s : x_t;
    const Tensor& dx = domain == 0 ? back.dx_s : back.dx_t;
    for (Index i = 0; i < x.size(); ++i) {
      auto d = [&](double step) {
        Tensor up = x, down = x;
        up.array()[i] += step;
        down.array()[i] -= step;
        if (domain == 0)
          return (da_probe_loss(up, x_t, alpha, eps, probe) -
                  da_probe_loss(down, x_t, alpha, eps, probe)) /
                 (2.0 * step);
        return (da_probe_loss(x_s, up, alpha, eps, probe) -
                da_probe_loss(x_s, down, alpha, eps, probe)) /
               (2.0 * step);
      };
      fd_component_error(dx.array()[i], d, rel_tol, 1e-5, {1e-3, 4e-3}, stats);
    }
  }

  auto d_alpha = [&](double step) {
    if (alpha - step >= 0.5 && alpha + step <= 1.0)
      return (da_probe_loss(x_s, x_t, alpha + step, eps, probe) -
              da_probe_loss(x_s, x_t, alpha - step, eps, probe)) /
             (2.0 * step);
    return (da_probe_loss_extended(x_s, x_t, alpha + step, eps, probe) -
            da_probe_loss_extended(x_s, x_t, alpha - step, eps, probe)) /
           (2.0 * step);
  };
  fd_component_error(back.d_alpha, d_alpha, rel_tol, 1e-5, {1e-6, 1e-4}, stats);
  return stats;
}

/// Reference plain batch normalization over one block, biased variance.
struct PlainBn {
  Tensor y;
  Eigen::ArrayXd mean, var;
};

inline PlainBn plain_bn_forward(const Tensor& x, double eps) {
  PlainBn out;
  out.mean = reduce_channel(x, Reduce::mean);
  out.var = reduce_channel(x, Reduce::var);
  out.y = Tensor(x.shape());
  for (Index c = 0; c < x.channels(); ++c) {
    const double inv = 1.0 / std::sqrt(eps + out.var[c]);
    set_channel_values(out.y, c, (channel_values(x, c) - out.mean[c]) * inv);
  }
  return out;
}

/// Standard BN input gradient on one block:
/// dx = (1/std) [g - (1/N)(sum g + y sum(y g))] per channel.
inline Tensor plain_bn_backward(const Tensor& y, const Eigen::ArrayXd& var,
                                double eps, const Tensor& g) {
  Tensor dx(y.shape());
  const double count = static_cast<double>(y.batch() * y.spatial());
  for (Index c = 0; c < y.channels(); ++c) {
    const Eigen::ArrayXd yc = channel_values(y, c);
    const Eigen::ArrayXd gc = channel_values(g, c);
    const double inv = 1.0 / std::sqrt(eps + var[c]);
    set_channel_values(
        dx, c, inv * (gc - (gc.sum() + yc * (yc * gc).sum()) / count));
  }
  return dx;
}

}  // namespace dalkit::testing

#endif  // DALKIT_TESTS_HELPERS_HPP_
