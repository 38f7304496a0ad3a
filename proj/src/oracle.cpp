#include "dalkit/oracle.hpp"

#include <cmath>

namespace dalkit {

Eigen::VectorXd fd_gradient(
    const std::function<double(const Eigen::VectorXd&)>& f,
    const Eigen::VectorXd& at, const FdConfig& cfg) {
  const double h = cfg.step;
  Eigen::VectorXd grad(at.size());
  Eigen::VectorXd x = at;
  for (Eigen::Index i = 0; i < at.size(); ++i) {
    x[i] = at[i] + h;
    const double up = f(x);
    x[i] = at[i] - h;
    const double down = f(x);
    x[i] = at[i];
    if (!std::isfinite(up) || !std::isfinite(down))
      throw ValueError("fd_gradient: non-finite function evaluation");
    grad[i] = (up - down) / (2.0 * h);
  }
  return grad;
}

double fd_derivative(const std::function<double(double)>& f, double at,
                     const FdConfig& cfg) {
  const double up = f(at + cfg.step);
  const double down = f(at - cfg.step);
  if (!std::isfinite(up) || !std::isfinite(down))
    throw ValueError("fd_derivative: non-finite function evaluation");
  return (up - down) / (2.0 * cfg.step);
}

MixedStats brute_statistics(const Tensor& x_s, const Tensor& x_t, double alpha,
                            double eps) {
  if (x_s.channels() != x_t.channels())
    throw DimensionError("source and target channel extents differ");
  if (x_s.batch() < 1) throw DimensionError("source block is empty");
  if (x_t.batch() < 1) throw DimensionError("target block is empty");
  if (alpha < 0.5 || alpha > 1.0) throw ValueError("alpha outside [0.5, 1]");
  if (eps < 0.0) throw ValueError("eps must be non-negative");

  const Index channels = x_s.channels();
  const Index hw_s = x_s.spatial();
  const Index hw_t = x_t.spatial();
  const double n_s = static_cast<double>(x_s.batch() * hw_s);
  const double n_t = static_cast<double>(x_t.batch() * hw_t);

  MixedStats stats;
  stats.mu_st.resize(channels);
  stats.var_st.resize(channels);
  stats.mu_ts.resize(channels);
  stats.var_ts.resize(channels);
  stats.eps = eps;
  stats.alpha_used = alpha;

  for (Index c = 0; c < channels; ++c) {
    double sum_s = 0.0;
    for (Index n = 0; n < x_s.batch(); ++n)
      for (Index p = 0; p < hw_s; ++p)
        sum_s += x_s.array()[(n * channels + c) * hw_s + p];
    double sum_t = 0.0;
    for (Index n = 0; n < x_t.batch(); ++n)
      for (Index p = 0; p < hw_t; ++p)
        sum_t += x_t.array()[(n * channels + c) * hw_t + p];

    const double mu_st = alpha / n_s * sum_s + (1.0 - alpha) / n_t * sum_t;
    const double mu_ts = (1.0 - alpha) / n_s * sum_s + alpha / n_t * sum_t;

    double dev_s_st = 0.0, dev_s_ts = 0.0;
    for (Index n = 0; n < x_s.batch(); ++n)
      for (Index p = 0; p < hw_s; ++p) {
        const double v = x_s.array()[(n * channels + c) * hw_s + p];
        dev_s_st += (v - mu_st) * (v - mu_st);
        dev_s_ts += (v - mu_ts) * (v - mu_ts);
      }
    double dev_t_st = 0.0, dev_t_ts = 0.0;
    for (Index n = 0; n < x_t.batch(); ++n)
      for (Index p = 0; p < hw_t; ++p) {
        const double v = x_t.array()[(n * channels + c) * hw_t + p];
        dev_t_st += (v - mu_st) * (v - mu_st);
        dev_t_ts += (v - mu_ts) * (v - mu_ts);
      }

    stats.mu_st[c] = mu_st;
    stats.mu_ts[c] = mu_ts;
    stats.var_st[c] = alpha / n_s * dev_s_st + (1.0 - alpha) / n_t * dev_t_st;
    stats.var_ts[c] = (1.0 - alpha) / n_s * dev_s_ts + alpha / n_t * dev_t_ts;
  }
  return stats;
}

double relative_error(double a, double b, double floor) {
  return std::abs(a - b) / std::max({std::abs(a), std::abs(b), floor});
}

bool within_tolerance(double a, double b, const FdConfig& cfg) {
  return relative_error(a, b, cfg.abs_floor) <= cfg.rel_tol;
}

}  // namespace dalkit
