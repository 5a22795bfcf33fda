#include "polymom/lsq.hpp"

#include <algorithm>

#include <unsupported/Eigen/NonLinearOptimization>

namespace polymom {

namespace {

// MINPACK requires at least as many residuals as parameters; short systems
// are padded with zeros.
struct Functor {
  using Scalar = double;
  enum { InputsAtCompileTime = Eigen::Dynamic, ValuesAtCompileTime = Eigen::Dynamic };
  using InputType = Eigen::VectorXd;
  using ValueType = Eigen::VectorXd;
  using JacobianType = Eigen::MatrixXd;

  const LsqProblem* p;
  double step;
  int m;

  int inputs() const { return p->n_params; }
  int values() const { return m; }

  int operator()(const Eigen::VectorXd& x, Eigen::VectorXd& f) const {
    Eigen::VectorXd r(p->n_residuals);
    p->residual(x, r);
    f.setZero(m);
    f.head(p->n_residuals) = r;
    return 0;
  }

  int df(const Eigen::VectorXd& x, Eigen::MatrixXd& j) const {
    j.setZero(m, p->n_params);
    if (p->jacobian) {
      Eigen::MatrixXd jr(p->n_residuals, p->n_params);
      p->jacobian(x, jr);
      j.topRows(p->n_residuals) = jr;
      return 0;
    }
    Eigen::VectorXd xp = x, xm = x, fp(p->n_residuals), fm(p->n_residuals);
    for (int k = 0; k < p->n_params; ++k) {
      const double h = step * std::max(1.0, std::abs(x(k)));
      xp(k) = x(k) + h;
      xm(k) = x(k) - h;
      p->residual(xp, fp);
      p->residual(xm, fm);
      j.col(k).head(p->n_residuals) = (fp - fm) / (2.0 * h);
      xp(k) = x(k);
      xm(k) = x(k);
    }
    return 0;
  }
};

}  // namespace

LsqResult solve_lsq(const LsqProblem& problem, Eigen::VectorXd x0, const LsqOptions& options) {
  Functor f{&problem, options.fd_step, std::max(problem.n_residuals, problem.n_params)};
  Eigen::LevenbergMarquardt<Functor> lm(f);
  lm.parameters.ftol = options.ftol;
  lm.parameters.xtol = options.xtol;
  lm.parameters.maxfev = options.max_evaluations;
  LsqResult out;
  out.status = static_cast<int>(lm.minimize(x0));
  out.x = x0;
  Eigen::VectorXd r(problem.n_residuals);
  problem.residual(x0, r);
  out.cost = r.squaredNorm();
  out.evaluations = static_cast<int>(lm.nfev);
  return out;
}

}  // namespace polymom
