#ifndef DALKIT_ORACLE_HPP_
#define DALKIT_ORACLE_HPP_

#include <Eigen/Dense>
#include <functional>

#include "dalkit/dal.hpp"
#include "dalkit/tensor.hpp"

namespace dalkit {

/// Settings for central-difference checks. h = 1e-5 balances truncation
/// against rounding in double precision.
struct FdConfig {
  double step = 1e-5;
  double rel_tol = 1e-5;
  double abs_floor = 1e-8;
};

/// Central-difference gradient: component i is
/// (f(x + h e_i) - f(x - h e_i)) / (2h).
Eigen::VectorXd fd_gradient(const std::function<double(const Eigen::VectorXd&)>& f,
                            const Eigen::VectorXd& at, const FdConfig& cfg = {});

/// One-dimensional convenience overload.
double fd_derivative(const std::function<double(double)>& f, double at,
                     const FdConfig& cfg = {});

/// Naive double-loop evaluation of the four mixture statistics, kept
/// deliberately independent of compute_mixed_statistics.
MixedStats brute_statistics(const Tensor& x_s, const Tensor& x_t, double alpha,
                            double eps);

/// |a - b| / max(|a|, |b|, floor); robust near zero.
double relative_error(double a, double b, double floor = 1e-8);

/// relative_error(a, b, cfg.abs_floor) <= cfg.rel_tol.
bool within_tolerance(double a, double b, const FdConfig& cfg = {});

}  // namespace dalkit

#endif  // DALKIT_ORACLE_HPP_
