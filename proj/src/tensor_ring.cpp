#include "polymom/tensor_ring.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <utility>

#include <Eigen/Eigenvalues>

#include "polymom/error.hpp"
#include "polymom/gauge.hpp"
#include "polymom/lsq.hpp"
#include "polymom/rng.hpp"
#include "polymom/tensor.hpp"

namespace polymom {

namespace {

constexpr std::uint64_t kComboUnit = 0xc0b0;
constexpr std::uint64_t kRestartUnit = 0x7e57;
constexpr std::uint64_t kJennrichUnit = 0x1e77;

std::vector<std::pair<int, int>> upper_pairs(int r) {
  std::vector<std::pair<int, int>> out;
  for (int i = 0; i < r; ++i)
    for (int j = i; j < r; ++j) out.emplace_back(i, j);
  return out;
}

Eigen::MatrixXd combine(const std::vector<Eigen::MatrixXd>& q, const Eigen::VectorXd& w) {
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(q.front().rows(), q.front().cols());
  for (size_t a = 0; a < q.size(); ++a) out += w(static_cast<Eigen::Index>(a)) * q[a];
  return out;
}

void check_combo_shape(const PolyNetwork& net, const Eigen::VectorXd& lambda, const Eigen::VectorXd& mu) {
  if (net.kind != NetworkKind::quadratic) throw DomainError("expected a quadratic network");
  if (lambda.size() != net.d || mu.size() != net.d) throw DomainError("combination length must equal d");
}

/// Residuals of the moment fit over a ≤ b and a ≤ b ≤ c, weighted by the square
/// root of the number of ordered tuples each stands for.
class LocalFit {
 public:
  LocalFit(const Eigen::MatrixXd& s, const Cube& t, int r, bool diagonal)
      : s_(s), t_(t), r_(r), d_(static_cast<int>(s.rows())), diagonal_(diagonal) {
    if (diagonal_) {
      for (int i = 0; i < r_; ++i) params_.emplace_back(i, i);
    } else {
      params_ = upper_pairs(r_);
    }
    for (int a = 0; a < d_; ++a)
      for (int b = a; b < d_; ++b) {
        pairs_.push_back({a, b, std::sqrt(a == b ? 1.0 : 2.0)});
        for (int c = b; c < d_; ++c) {
          const double perms = (a == b && b == c) ? 1.0 : (a == b || b == c) ? 3.0 : 6.0;
          triples_.push_back({a, b, c, std::sqrt(perms)});
        }
      }
  }

  int n_params() const { return d_ * static_cast<int>(params_.size()); }
  int n_residuals() const { return static_cast<int>(pairs_.size() + triples_.size()); }

  std::vector<Eigen::MatrixXd> unpack(const Eigen::VectorXd& x) const {
    const int p = static_cast<int>(params_.size());
    std::vector<Eigen::MatrixXd> q(d_, Eigen::MatrixXd::Zero(r_, r_));
    for (int a = 0; a < d_; ++a)
      for (int k = 0; k < p; ++k) {
        const auto [i, j] = params_[k];
        q[a](i, j) = q[a](j, i) = x(a * p + k);
      }
    return q;
  }

  Eigen::VectorXd pack(const std::vector<Eigen::MatrixXd>& q) const {
    const int p = static_cast<int>(params_.size());
    Eigen::VectorXd x(n_params());
    for (int a = 0; a < d_; ++a)
      for (int k = 0; k < p; ++k) x(a * p + k) = q[a](params_[k].first, params_[k].second);
    return x;
  }

  void residual(const Eigen::VectorXd& x, Eigen::VectorXd& out) const {
    const auto q = unpack(x);
    int row = 0;
    for (const auto& pr : pairs_) out(row++) = pr.w * ((q[pr.a] * q[pr.b]).trace() - s_(pr.a, pr.b));
    for (const auto& tr : triples_)
      out(row++) = tr.w * ((q[tr.a] * q[tr.b] * q[tr.c]).trace() - t_(tr.a, tr.b, tr.c));
  }

  void jacobian(const Eigen::VectorXd& x, Eigen::MatrixXd& jac) const {
    const auto q = unpack(x);
    const int p = static_cast<int>(params_.size());
    jac.setZero(n_residuals(), n_params());
    // d Tr(Q_a B) / d(Q_a)_ij for a symmetric parametrization.
    auto add = [&](int row, int a, const Eigen::MatrixXd& b, double w) {
      for (int k = 0; k < p; ++k) {
        const auto [i, j] = params_[k];
        jac(row, a * p + k) += w * (i == j ? b(i, i) : b(i, j) + b(j, i));
      }
    };
    int row = 0;
    for (const auto& pr : pairs_) {
      add(row, pr.a, q[pr.b], pr.w);
      add(row, pr.b, q[pr.a], pr.w);
      ++row;
    }
    for (const auto& tr : triples_) {
      add(row, tr.a, q[tr.b] * q[tr.c], tr.w);
      add(row, tr.b, q[tr.c] * q[tr.a], tr.w);
      add(row, tr.c, q[tr.a] * q[tr.b], tr.w);
      ++row;
    }
  }

  Eigen::VectorXd random_start(Stream& rng) const {
    std::vector<Eigen::MatrixXd> q(d_);
    for (int a = 0; a < d_; ++a) {
      const double scale = std::sqrt(std::max(s_(a, a), 1e-12)) / r_;
      Eigen::MatrixXd g = rng.normal_matrix(r_, r_);
      g = 0.5 * (g + g.transpose());
      if (diagonal_) g = Eigen::MatrixXd(g.diagonal().asDiagonal());
      q[a] = scale * g;
    }
    return pack(q);
  }

 private:
  struct Pair {
    int a, b;
    double w;
  };
  struct Triple {
    int a, b, c;
    double w;
  };
  const Eigen::MatrixXd& s_;
  const Cube& t_;
  int r_;
  int d_;
  bool diagonal_;
  std::vector<std::pair<int, int>> params_;
  std::vector<Pair> pairs_;
  std::vector<Triple> triples_;
};

struct LocalOutcome {
  std::vector<Eigen::MatrixXd> q;
  double residual = std::numeric_limits<double>::infinity();
  int evaluations = 0;
  int restarts = 0;
};

LocalOutcome local_fit(const QuadraticMomentTable& m, int r, const TRConfig& cfg, double threshold,
                       const std::optional<std::vector<Eigen::MatrixXd>>& start) {
  const LocalFit fit(m.S, m.T, r, cfg.diagonal);
  LsqProblem prob;
  prob.n_params = fit.n_params();
  prob.n_residuals = fit.n_residuals();
  prob.residual = [&](const Eigen::VectorXd& x, Eigen::VectorXd& out) { fit.residual(x, out); };
  prob.jacobian = [&](const Eigen::VectorXd& x, Eigen::MatrixXd& j) { fit.jacobian(x, j); };
  LsqOptions opts;
  opts.max_evaluations = cfg.max_evaluations;

  LocalOutcome best;
  const int total = cfg.restarts + (start ? 1 : 0);
  for (int k = 0; k < total; ++k) {
    Eigen::VectorXd x0;
    if (start && k == 0) {
      x0 = fit.pack(*start);
    } else {
      Stream rng(cfg.rng_seed, kRestartUnit, static_cast<std::uint64_t>(k));
      x0 = fit.random_start(rng);
    }
    const LsqResult res = solve_lsq(prob, x0, opts);
    const auto q = fit.unpack(res.x);
    const auto [rs, rt] = moment_residuals(PolyNetwork::quadratic(q), m.S, m.T);
    const double resid = std::max(rs, rt);
    best.evaluations += res.evaluations;
    best.restarts = k + 1;
    if (resid < best.residual) {
      best.residual = resid;
      best.q = q;
    }
    // Further restarts cannot improve a fit already at the target accuracy.
    if (best.residual <= cfg.tol * std::max(1.0, m.S.cwiseAbs().maxCoeff()) && best.residual <= threshold) break;
  }
  return best;
}

std::vector<Eigen::MatrixXd> round_relaxation(const TensorRingProgram& prog, const Pseudoexpectation& pe) {
  std::vector<Eigen::MatrixXd> q(prog.d, Eigen::MatrixXd::Zero(prog.r, prog.r));
  for (int a = 0; a < prog.d; ++a)
    for (int i = 0; i < prog.r; ++i)
      for (int j = i; j < prog.r; ++j) q[a](i, j) = q[a](j, i) = pe(prog.q_entry(a, i, j));
  return q;
}

}  // namespace

NonDegenCombo find_combo(const Eigen::MatrixXd& g, int r, std::uint64_t rng_seed, int rank) {
  const int d = static_cast<int>(g.rows());
  if (g.cols() != d) throw DomainError("find_combo: Gram matrix must be square");
  if (r < 1) throw DomainError("find_combo: r must be positive");
  const int m = rank > 0 ? rank : static_cast<int>(binomial(r + 1, 2));
  if (d < m) throw DomainError("find_combo: need d >= " + std::to_string(m));
  if ((g - g.transpose()).cwiseAbs().maxCoeff() > 1e-9 * std::max(1.0, g.cwiseAbs().maxCoeff()))
    throw DomainError("find_combo: Gram matrix must be symmetric");

  const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(0.5 * (g + g.transpose()));
  const Eigen::VectorXd top = es.eigenvalues().tail(m);
  const double floor = 1e-14 * std::max(1.0, es.eigenvalues().cwiseAbs().maxCoeff());
  if (top.minCoeff() <= floor)
    throw DegeneracyError("find_combo: truncated Gram matrix has nonpositive eigenvalues");
  // H̃(H̃ᵀH̃)⁻¹ = U diag(σ^{-1/2}).
  const Eigen::MatrixXd w = es.eigenvectors().rightCols(m) * top.cwiseSqrt().cwiseInverse().asDiagonal();

  Stream rng(rng_seed, kComboUnit);
  const Eigen::VectorXd gl = rng.normal_vector(m);
  const Eigen::VectorXd gm = rng.normal_vector(m);
  NonDegenCombo out;
  out.lambda = (w * gl).normalized();
  out.mu = (w * gm).normalized();
  return out;
}

Nondegeneracy validate_nondegeneracy(const PolyNetwork& net, const Eigen::VectorXd& lambda,
                                     const Eigen::VectorXd& mu) {
  check_combo_shape(net, lambda, mu);
  const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(combine(net.Q, lambda));
  Nondegeneracy out;
  const Eigen::VectorXd ev = es.eigenvalues();
  out.eigengap = std::numeric_limits<double>::infinity();
  for (int i = 1; i < ev.size(); ++i) out.eigengap = std::min(out.eigengap, ev(i) - ev(i - 1));
  const Eigen::MatrixXd v = es.eigenvectors().transpose();
  out.min_entry = (v * combine(net.Q, mu) * v.transpose()).cwiseAbs().minCoeff();
  return out;
}

GaugeFixed gauge_fix(const PolyNetwork& net, const Eigen::VectorXd& lambda, const Eigen::VectorXd& mu) {
  check_combo_shape(net, lambda, mu);
  const Eigen::MatrixXd ql = combine(net.Q, lambda);
  const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(0.5 * (ql + ql.transpose()));
  const Eigen::VectorXd ev = es.eigenvalues();
  const double scale = std::max(1.0, ev.cwiseAbs().maxCoeff());
  for (int i = 1; i < ev.size(); ++i)
    if (ev(i) - ev(i - 1) <= 1e-12 * scale)
      throw DegeneracyError("gauge_fix: Q_lambda has a repeated eigenvalue");

  Eigen::MatrixXd u = es.eigenvectors().transpose();
  for (int i = 0; i < u.rows(); ++i) {
    Eigen::Index k;
    u.row(i).cwiseAbs().maxCoeff(&k);
    if (u(i, k) < 0.0) u.row(i) *= -1.0;
  }
  const Eigen::MatrixXd qm = u * combine(net.Q, mu) * u.transpose();
  for (int j = 1; j < u.rows(); ++j)
    if (qm(0, j) < 0.0) u.row(j) *= -1.0;

  GaugeRotation rot(u, 1e-8);
  return {rotate_network(net, rot), rot};
}

Backend parse_backend(const std::string& name) {
  if (name == "sos") return Backend::sos;
  if (name == "local") return Backend::local;
  if (name == "hybrid") return Backend::hybrid;
  throw DomainError("unknown backend '" + name + "' (expected sos, local or hybrid)");
}

std::string backend_name(Backend b) {
  switch (b) {
    case Backend::sos:
      return "sos";
    case Backend::local:
      return "local";
    case Backend::hybrid:
      return "hybrid";
  }
  return "local";
}

std::pair<double, double> moment_residuals(const PolyNetwork& net, const Eigen::MatrixXd& s, const Cube& t) {
  const int d = net.d;
  double rs = 0.0, rt = 0.0;
  for (int a = 0; a < d; ++a)
    for (int b = a; b < d; ++b) {
      const Eigen::MatrixXd ab = net.Q[a] * net.Q[b];
      rs = std::max(rs, std::abs(ab.trace() - s(a, b)));
      if (t.dim() == d)
        for (int c = b; c < d; ++c) rt = std::max(rt, std::abs((ab * net.Q[c]).trace() - t(a, b, c)));
    }
  return {rs, rt};
}

RecoveryReport decompose(const QuadraticMomentTable& moments, int r, const TRConfig& config,
                         const PolyNetwork* truth) {
  moments.validate();
  const int d = moments.d();
  if (r < 1) throw DomainError("decompose: r must be positive");
  if (config.restarts < 1) throw DomainError("decompose: restarts must be at least 1");
  if (!(config.tol > 0.0)) throw DomainError("decompose: tol must be positive");
  if (moments.T.dim() != d) throw DomainError("decompose: third moments are required");
  const int m = config.diagonal ? r : static_cast<int>(binomial(r + 1, 2));
  if (d < m) throw DomainError("decompose: need d >= " + std::to_string(m));
  if (config.diagonal && config.backend != Backend::local)
    throw DomainError("decompose: diagonal units are supported by the local backend only");

  NonDegenCombo combo;
  if (config.combo) {
    combo.lambda = config.combo->lambda;
    combo.mu = config.combo->mu;
  } else {
    combo = find_combo(moments.S, r, config.rng_seed, m);
  }

  RecoveryReport rep;
  rep.backend = backend_name(config.backend);
  const double threshold = 1e3 * std::max(moments.eta, config.tol);

  std::optional<std::vector<Eigen::MatrixXd>> start;
  if (config.backend != Backend::local) {
    const TensorRingParams params = tensor_ring_params(moments.S, r, moments.eta, config.degree);
    const TensorRingProgram prog = encode_tensor_ring(moments.S, moments.T, r, combo.combo(), params);
    const SolveResult sol = solve(prog.program, config.solver);
    rep.iterations = sol.iterations;
    rep.message = sol.message;
    if (!sol.feasible()) throw ConvergenceError("decompose: relaxation reported infeasible (" + sol.message + ")");
    start = round_relaxation(prog, sol.pe);
  }

  if (config.backend == Backend::sos) {
    rep.recovered = PolyNetwork::quadratic(*start);
    rep.restarts_used = 0;
  } else {
    TRConfig cfg = config;
    if (config.backend == Backend::hybrid) cfg.restarts = config.restarts - 1;
    const LocalOutcome fit = local_fit(moments, r, cfg, threshold, start);
    rep.iterations += fit.evaluations;
    rep.restarts_used = fit.restarts;
    if (fit.residual > threshold)
      throw ConvergenceError("decompose: best moment residual " + std::to_string(fit.residual) +
                             " exceeds threshold " + std::to_string(threshold));
    rep.recovered = gauge_fix(PolyNetwork::quadratic(fit.q), combo.lambda, combo.mu).net;
  }

  std::tie(rep.s_residual, rep.t_residual) = moment_residuals(rep.recovered, moments.S, moments.T);
  if (truth) {
    const Nondegeneracy nd = validate_nondegeneracy(*truth, combo.lambda, combo.mu);
    combo.eigengap = nd.eigengap;
    combo.min_entry = nd.min_entry;
    rep.gauge_distance = gauge_distance(rep.recovered, *truth).distance;
  }
  rep.combo = combo;
  return rep;
}

std::vector<Eigen::VectorXd> jennrich_diagonal(const Cube& t, std::uint64_t rng_seed, int rank) {
  const int d = t.dim();
  if (d < 1) throw DomainError("jennrich_diagonal: empty tensor");
  Eigen::MatrixXd unfold(d, static_cast<Eigen::Index>(d) * d);
  for (int a = 0; a < d; ++a)
    for (int b = 0; b < d; ++b)
      for (int c = 0; c < d; ++c) unfold(a, b * d + c) = t(a, b, c);
  const Eigen::JacobiSVD<Eigen::MatrixXd> svd(unfold, Eigen::ComputeThinU);
  const Eigen::VectorXd sv = svd.singularValues();
  if (sv(0) == 0.0) return {};
  int r = rank;
  if (r < 0) {
    r = 0;
    while (r < sv.size() && sv(r) > 1e-10 * sv(0)) ++r;
  }
  if (r > d) throw DomainError("jennrich_diagonal: rank exceeds dimension");
  const Eigen::MatrixXd u = svd.matrixU().leftCols(r);

  auto contract = [&](const Eigen::VectorXd& x) {
    Eigen::MatrixXd out = Eigen::MatrixXd::Zero(d, d);
    for (int a = 0; a < d; ++a)
      for (int b = 0; b < d; ++b)
        for (int c = 0; c < d; ++c) out(a, b) += t(a, b, c) * x(c);
    return Eigen::MatrixXd(u.transpose() * out * u);
  };

  for (int attempt = 0; attempt < 10; ++attempt) {
    Stream rng(rng_seed, kJennrichUnit, static_cast<std::uint64_t>(attempt));
    const Eigen::MatrixXd ax = contract(rng.normal_vector(d));
    const Eigen::MatrixXd ay = contract(rng.normal_vector(d));
    const Eigen::FullPivLU<Eigen::MatrixXd> lu(ay);
    if (!lu.isInvertible()) continue;
    const Eigen::EigenSolver<Eigen::MatrixXd> es(ax * lu.inverse());
    if (es.info() != Eigen::Success) continue;
    const Eigen::VectorXcd ev = es.eigenvalues();
    const double scale = std::max(1.0, ev.cwiseAbs().maxCoeff());
    bool ok = ev.imag().cwiseAbs().maxCoeff() <= 1e-8 * scale;
    for (int i = 0; ok && i < r; ++i)
      for (int j = i + 1; j < r; ++j)
        if (std::abs(ev(i).real() - ev(j).real()) <= 1e-8 * scale) ok = false;
    if (!ok) continue;

    std::vector<Eigen::VectorXd> dirs;
    for (int i = 0; i < r; ++i) dirs.push_back((u * es.eigenvectors().col(i).real()).normalized());
    Eigen::MatrixXd basis(static_cast<Eigen::Index>(d) * d * d, r);
    for (int i = 0; i < r; ++i) basis.col(i) = outer_power(dirs[i], 3).values();
    const Eigen::VectorXd coef = basis.colPivHouseholderQr().solve(t.flat());
    std::vector<Eigen::VectorXd> out;
    for (int i = 0; i < r; ++i) out.push_back(std::cbrt(coef(i)) * dirs[i]);
    std::sort(out.begin(), out.end(), [](const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
      return std::lexicographical_compare(a.data(), a.data() + a.size(), b.data(), b.data() + b.size());
    });
    return out;
  }
  throw DegeneracyError("jennrich_diagonal: contraction eigenvalues degenerate after 10 attempts");
}

PolyNetwork diagonal_network(const std::vector<Eigen::VectorXd>& v) {
  if (v.empty()) throw DomainError("diagonal_network: no components");
  const int r = static_cast<int>(v.size());
  const int d = static_cast<int>(v.front().size());
  std::vector<Eigen::MatrixXd> q(d, Eigen::MatrixXd::Zero(r, r));
  for (int i = 0; i < r; ++i) {
    if (v[i].size() != d) throw DomainError("diagonal_network: component lengths differ");
    for (int a = 0; a < d; ++a) q[a](i, i) = v[i](a);
  }
  return PolyNetwork::quadratic(std::move(q));
}

Eigen::MatrixXd weighted_flattening(const std::vector<Eigen::MatrixXd>& q) {
  if (q.empty()) return {};
  const int r = static_cast<int>(q.front().rows());
  const auto pairs = upper_pairs(r);
  Eigen::MatrixXd out(static_cast<Eigen::Index>(q.size()), static_cast<Eigen::Index>(pairs.size()));
  for (size_t a = 0; a < q.size(); ++a)
    for (size_t k = 0; k < pairs.size(); ++k) {
      const auto [i, j] = pairs[k];
      out(a, k) = (i == j ? 1.0 : std::sqrt(2.0)) * q[a](i, j);
    }
  return out;
}

std::vector<Eigen::MatrixXd> extend_tail(const Eigen::MatrixXd& s, const std::vector<Eigen::MatrixXd>& head, int d) {
  const int dh = static_cast<int>(head.size());
  if (dh == 0) throw DomainError("extend_tail: empty head");
  const int r = static_cast<int>(head.front().rows());
  const int m = static_cast<int>(binomial(r + 1, 2));
  if (dh < m) throw DomainError("extend_tail: head needs at least " + std::to_string(m) + " units");
  if (d < dh || s.rows() < d || s.cols() < d) throw DomainError("extend_tail: S must cover all d units");
  if (d == dh) return {};

  const Eigen::MatrixXd a = weighted_flattening(head);
  const Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(a);
  if (qr.rank() < m) throw DegeneracyError("extend_tail: head flattening is rank deficient");
  const Eigen::MatrixXd x = qr.solve(s.block(0, dh, dh, d - dh));

  const auto pairs = upper_pairs(r);
  std::vector<Eigen::MatrixXd> tail(d - dh, Eigen::MatrixXd(r, r));
  for (int b = 0; b < d - dh; ++b)
    for (int k = 0; k < m; ++k) {
      const auto [i, j] = pairs[k];
      const double v = i == j ? x(k, b) : x(k, b) / std::sqrt(2.0);
      tail[b](i, j) = tail[b](j, i) = v;
    }
  return tail;
}

AssumptionReportTR verify_assumption_tr(const PolyNetwork& net) {
  if (net.kind != NetworkKind::quadratic) throw DomainError("verify_assumption_tr: expected a quadratic network");
  AssumptionReportTR rep;
  rep.m = static_cast<int>(binomial(net.r + 1, 2));
  rep.radius = net.radius();
  const Eigen::VectorXd sv = Eigen::JacobiSVD<Eigen::MatrixXd>(weighted_flattening(net.Q)).singularValues();
  if (net.d < rep.m) {
    rep.sigma_m = 0.0;
    rep.warnings.push_back("d < m: sigma_m is zero by dimension count");
  } else {
    rep.sigma_m = sv(rep.m - 1);
    if (rep.sigma_m <= 1e-12 * std::max(1.0, sv(0))) rep.warnings.push_back("sigma_m is numerically zero");
  }
  if (net.smoothing) {
    rep.predicted_kappa = 0.1 * net.smoothing->rho * std::sqrt(static_cast<double>(net.d) / net.r);
    rep.flag = rep.sigma_m >= *rep.predicted_kappa;
  }
  return rep;
}

}  // namespace polymom
