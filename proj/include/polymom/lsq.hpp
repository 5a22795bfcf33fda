#pragma once

#include <functional>

#include <Eigen/Dense>

namespace polymom {

/// Residual r(x) ∈ R^m and optional analytic Jacobian for damped least squares.
struct LsqProblem {
  int n_params = 0;
  int n_residuals = 0;
  std::function<void(const Eigen::VectorXd&, Eigen::VectorXd&)> residual;
  /// Central differences are used when empty.
  std::function<void(const Eigen::VectorXd&, Eigen::MatrixXd&)> jacobian;
};

struct LsqOptions {
  int max_evaluations = 4000;
  double ftol = 1e-16;
  double xtol = 1e-16;
  double fd_step = 1e-6;
};

struct LsqResult {
  Eigen::VectorXd x;
  double cost = 0.0;  ///< ‖r(x)‖²
  int evaluations = 0;
  int status = 0;
};

/// Levenberg–Marquardt (MINPACK lmder via Eigen's unsupported module).
LsqResult solve_lsq(const LsqProblem& problem, Eigen::VectorXd x0, const LsqOptions& options = {});

}  // namespace polymom
