#include "polymom/lowrank.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "polymom/error.hpp"
#include "polymom/gauge.hpp"
#include "polymom/lsq.hpp"
#include "polymom/programs.hpp"
#include "polymom/rng.hpp"
#include "polymom/tensor.hpp"

namespace polymom {

namespace {

constexpr std::uint64_t kRestartUnit = 0x10a7;
constexpr std::uint64_t kRefitUnit = 0x4ef1;

/// E⟨v,g⟩^ω⟨w,g⟩^ω (gaussian) or ⟨v,w⟩^ω (identity), with its gradient in v.
double pair_kernel(const Eigen::VectorXd& v, const Eigen::VectorXd& w, int omega, SigmaMode mode,
                   Eigen::VectorXd* grad_v) {
  const double vw = v.dot(w);
  if (mode == SigmaMode::identity) {
    if (grad_v) *grad_v = omega * std::pow(vw, omega - 1) * w;
    return std::pow(vw, omega);
  }
  const double vv = v.squaredNorm();
  const double ww = w.squaredNorm();
  const double of = factorial(omega);
  double total = 0.0;
  if (grad_v) grad_v->setZero(v.size());
  for (int m = 0; 2 * m <= omega; ++m) {
    const double c = of * factorial(omega) / (factorial(m) * factorial(m) * factorial(omega - 2 * m)) *
                     std::pow(0.25, m);
    const int p = omega - 2 * m;
    total += c * std::pow(vw, p) * std::pow(vv * ww, m);
    if (grad_v) {
      if (p > 0) *grad_v += c * p * std::pow(vw, p - 1) * std::pow(vv * ww, m) * w;
      if (m > 0) *grad_v += c * std::pow(vw, p) * m * std::pow(vv, m - 1) * std::pow(ww, m) * 2.0 * v;
    }
  }
  return total;
}

class ComponentFit {
 public:
  ComponentFit(const Eigen::MatrixXd& s, int r, int omega, int ell, SigmaMode mode, double scale)
      : s_(s), r_(r), omega_(omega), ell_(ell), d_(static_cast<int>(s.rows())), mode_(mode), scale_(scale) {
    for (int a = 0; a < d_; ++a)
      for (int b = a; b < d_; ++b) pairs_.push_back({a, b, std::sqrt(a == b ? 1.0 : 2.0)});
  }

  int n_params() const { return d_ * ell_ * r_; }
  int n_residuals() const { return static_cast<int>(pairs_.size()); }

  Eigen::VectorXd comp(const Eigen::VectorXd& x, int a, int t) const { return x.segment((a * ell_ + t) * r_, r_); }

  void residual(const Eigen::VectorXd& x, Eigen::VectorXd& out) const {
    for (size_t k = 0; k < pairs_.size(); ++k) {
      const auto& p = pairs_[k];
      double v = 0.0;
      for (int t = 0; t < ell_; ++t)
        for (int u = 0; u < ell_; ++u) v += pair_kernel(comp(x, p.a, t), comp(x, p.b, u), omega_, mode_, nullptr);
      out(static_cast<Eigen::Index>(k)) = p.w * (scale_ * v - s_(p.a, p.b));
    }
  }

  void jacobian(const Eigen::VectorXd& x, Eigen::MatrixXd& jac) const {
    jac.setZero(n_residuals(), n_params());
    Eigen::VectorXd g(r_);
    for (size_t k = 0; k < pairs_.size(); ++k) {
      const auto& p = pairs_[k];
      const auto row = static_cast<Eigen::Index>(k);
      for (int t = 0; t < ell_; ++t)
        for (int u = 0; u < ell_; ++u) {
          const Eigen::VectorXd vt = comp(x, p.a, t), vu = comp(x, p.b, u);
          pair_kernel(vt, vu, omega_, mode_, &g);
          jac.row(row).segment((p.a * ell_ + t) * r_, r_) += p.w * scale_ * g.transpose();
          pair_kernel(vu, vt, omega_, mode_, &g);
          jac.row(row).segment((p.b * ell_ + u) * r_, r_) += p.w * scale_ * g.transpose();
        }
    }
  }

  Eigen::VectorXd random_start(Stream& rng) const {
    Eigen::VectorXd x(n_params());
    const Eigen::VectorXd e1 = Eigen::VectorXd::Unit(r_, 0);
    const double unit = scale_ * ell_ * pair_kernel(e1, e1, omega_, mode_, nullptr);
    for (int a = 0; a < d_; ++a) {
      // Norms matched to S_aa so that every start is on the right scale.
      const double len = std::pow(std::max(s_(a, a), 1e-300) / unit, 1.0 / (2.0 * omega_));
      for (int t = 0; t < ell_; ++t)
        x.segment((a * ell_ + t) * r_, r_) = len * rng.normal_vector(r_) / std::sqrt(static_cast<double>(r_));
    }
    return x;
  }

  PolyNetwork network(const Eigen::VectorXd& x) const {
    std::vector<std::vector<Eigen::VectorXd>> comps(d_);
    for (int a = 0; a < d_; ++a)
      for (int t = 0; t < ell_; ++t) comps[a].push_back(comp(x, a, t));
    return PolyNetwork::lowrank(omega_, std::move(comps));
  }

  Eigen::VectorXd pack(const PolyNetwork& net) const {
    Eigen::VectorXd x(n_params());
    for (int a = 0; a < d_; ++a)
      for (int t = 0; t < ell_; ++t) x.segment((a * ell_ + t) * r_, r_) = net.components[a][t];
    return x;
  }

 private:
  struct Pair {
    int a, b;
    double w;
  };
  const Eigen::MatrixXd& s_;
  int r_, omega_, ell_, d_;
  SigmaMode mode_;
  double scale_;
  std::vector<Pair> pairs_;
};

/// Rank-ℓ components approximating each unit of a general network.
PolyNetwork refit_components(const PolyNetwork& net, int ell, std::uint64_t seed, int restarts) {
  std::vector<std::vector<Eigen::VectorXd>> comps(net.d);
  const int r = net.r, omega = net.omega;
  for (int a = 0; a < net.d; ++a) {
    const DenseTensor target = net.unit(a);
    LsqProblem prob;
    prob.n_params = ell * r;
    prob.n_residuals = static_cast<int>(target.values().size());
    prob.residual = [&](const Eigen::VectorXd& x, Eigen::VectorXd& out) {
      out = -target.values();
      for (int t = 0; t < ell; ++t) out += outer_power(x.segment(t * r, r), omega).values();
    };
    double best = std::numeric_limits<double>::infinity();
    Eigen::VectorXd bx;
    const double len = std::pow(std::max(target.norm(), 1e-300) / ell, 1.0 / omega);
    for (int k = 0; k < restarts; ++k) {
      Stream rng(seed, kRefitUnit, static_cast<std::uint64_t>(a * restarts + k));
      const LsqResult res = solve_lsq(prob, len * rng.normal_vector(ell * r) / std::sqrt(double(r)));
      if (res.cost < best) {
        best = res.cost;
        bx = res.x;
      }
    }
    for (int t = 0; t < ell; ++t) comps[a].push_back(bx.segment(t * r, r));
  }
  return PolyNetwork::lowrank(omega, std::move(comps));
}

struct StageOutput {
  LowRankProgram prog;
  SolveResult sol;
};

StageOutput run_stage(const Eigen::MatrixXd& s, const SigmaMatrix& sigma, int omega, int ell, double eta,
                      int degree, const std::optional<Combo>& combo, const SolverConfig& solver) {
  const LowRankParams params = lowrank_params(s, sigma, ell, eta, degree);
  StageOutput out{encode_lowrank(s, sigma, omega, params, combo), {}};
  out.sol = solve(out.prog.program, solver);
  if (!out.sol.feasible())
    throw ConvergenceError("factorize: relaxation reported infeasible (" + out.sol.message + ")");
  return out;
}

}  // namespace

Eigen::VectorXd f_vector(const DenseTensor& t) {
  if (t.order() % 2 == 0) throw DomainError("f_vector: order must be odd");
  return contract_pairs(t);
}

Eigen::VectorXd f_vector(const SymTensor& t) { return f_vector(t.to_dense()); }

PolyNetwork f_network(const PolyNetwork& net) {
  std::vector<Eigen::MatrixXd> f;
  for (int a = 0; a < net.d; ++a) {
    const Eigen::VectorXd v = f_vector(net.unit(a));
    f.push_back(v * v.transpose());
  }
  return PolyNetwork::quadratic(std::move(f));
}

GaugeRotation lowrank_gauge(const PolyNetwork& net, const Eigen::VectorXd& lambda, const Eigen::VectorXd& mu) {
  const GaugeFixed fixed = gauge_fix(f_network(net), lambda, mu);
  Eigen::MatrixXd u = fixed.rotation.matrix();
  const PolyNetwork rotated = rotate_network(net, fixed.rotation);
  double best = -1.0, sign = 1.0;
  for (int a = 0; a < rotated.d; ++a) {
    const DenseTensor t = rotated.unit(a);
    Eigen::Index k;
    const double mag = t.values().cwiseAbs().maxCoeff(&k);
    if (mag > best) {
      best = mag;
      sign = t.values()(k) < 0.0 ? -1.0 : 1.0;
    }
  }
  // For odd ω, −Id negates every unit while fixing each F_a.
  if (sign < 0.0 && net.omega % 2 == 1) u = -u;
  return GaugeRotation(u, 1e-8);
}

double pair_residual(const PolyNetwork& net, const Eigen::MatrixXd& s, SigmaMode mode, const SeedDistribution& seed) {
  const PairMomentTable pm = exact_pair_moments(net, mode, seed);
  return (pm.S - s).cwiseAbs().maxCoeff();
}

RecoveryReport factorize(const PairMomentTable& moments, int r, int omega, int ell, const LRConfig& config,
                         const PolyNetwork* truth) {
  moments.validate();
  const int d = moments.d();
  if (r < 1 || ell < 1) throw DomainError("factorize: r and ell must be positive");
  if (omega % 2 == 0 || omega < 1) throw DomainError("factorize: omega must be odd");
  if (config.restarts < 1) throw DomainError("factorize: restarts must be at least 1");
  if (!(config.tol > 0.0)) throw DomainError("factorize: tol must be positive");
  const int mf = static_cast<int>(binomial(r + 1, 2));
  if (d < mf) throw DomainError("factorize: need d >= " + std::to_string(mf));

  RecoveryReport rep;
  rep.backend = backend_name(config.backend);
  const double threshold = 1e3 * std::max(moments.eta, config.tol);
  std::optional<PolyNetwork> start;
  NonDegenCombo combo;

  if (config.backend != Backend::local) {
    const SigmaMatrix sigma =
        config.sigma == SigmaMode::gaussian ? sigma_matrix(r, omega, config.seed) : identity_sigma(r, omega);
    const StageOutput s1 =
        run_stage(moments.S, sigma, omega, ell, moments.eta, config.stage1_degree, std::nullopt, config.solver);
    Eigen::MatrixXd g(d, d);
    std::vector<std::vector<Polynomial>> f(d);
    for (int a = 0; a < d; ++a) f[a] = s1.prog.f_polys(a);
    for (int a = 0; a < d; ++a)
      for (int b = a; b < d; ++b) {
        Polynomial dot;
        for (int k = 0; k < r; ++k) dot += f[a][k] * f[b][k];
        g(a, b) = g(b, a) = s1.sol.pe(dot * dot);
      }
    combo = find_combo(g, r, config.rng_seed);
    const StageOutput s2 = run_stage(moments.S, sigma, omega, ell, moments.eta, config.stage2_degree,
                                     combo.combo(), config.solver);
    rep.iterations = s1.sol.iterations + s2.sol.iterations;
    rep.message = s2.sol.message;

    const auto tab = index_table(r, omega);
    double best = -1.0;
    int astar = 0;
    std::int64_t istar = 0;
    std::vector<Eigen::VectorXd> mag(d, Eigen::VectorXd(tab->dense_size()));
    for (int a = 0; a < d; ++a)
      for (std::int64_t o = 0; o < tab->dense_size(); ++o) {
        const Polynomial x = Polynomial::variable(s2.prog.t[a][o]);
        mag[a](o) = std::sqrt(std::max(s2.sol.pe(x * x), 0.0));
        if (mag[a](o) > best) {
          best = mag[a](o);
          astar = a;
          istar = o;
        }
      }
    const Polynomial anchor = Polynomial::variable(s2.prog.t[astar][istar]);
    std::vector<SymTensor> units;
    for (int a = 0; a < d; ++a) {
      DenseTensor t(omega, r);
      for (std::int64_t o = 0; o < tab->dense_size(); ++o) {
        const double sgn = s2.sol.pe(Polynomial::variable(s2.prog.t[a][o]) * anchor) < 0.0 ? -1.0 : 1.0;
        t.values()(o) = sgn * mag[a](o);
      }
      units.push_back(SymTensor::symmetrize(t));
    }
    start = PolyNetwork::general(std::move(units));
  }

  if (config.backend == Backend::sos) {
    rep.recovered = *start;
  } else {
    const double scale =
        config.sigma == SigmaMode::gaussian ? rotation_invariant_scale(config.seed, r, 2 * omega) : 1.0;
    const ComponentFit fit(moments.S, r, omega, ell, config.sigma, scale);
    LsqProblem prob;
    prob.n_params = fit.n_params();
    prob.n_residuals = fit.n_residuals();
    prob.residual = [&](const Eigen::VectorXd& x, Eigen::VectorXd& out) { fit.residual(x, out); };
    prob.jacobian = [&](const Eigen::VectorXd& x, Eigen::MatrixXd& j) { fit.jacobian(x, j); };
    LsqOptions opts;
    opts.max_evaluations = config.max_evaluations;

    double best = std::numeric_limits<double>::infinity();
    Eigen::VectorXd bx;
    const int total = config.restarts;
    const double target = config.tol * std::max(1.0, moments.S.cwiseAbs().maxCoeff());
    for (int k = 0; k < total; ++k) {
      Eigen::VectorXd x0;
      if (start && k == 0) {
        x0 = fit.pack(refit_components(*start, ell, config.rng_seed, 5));
      } else {
        Stream rng(config.rng_seed, kRestartUnit, static_cast<std::uint64_t>(k));
        x0 = fit.random_start(rng);
      }
      const LsqResult res = solve_lsq(prob, x0, opts);
      Eigen::VectorXd rv(prob.n_residuals);
      fit.residual(res.x, rv);
      // Residuals carry √2 weights off the diagonal; undo them for the max-abs measure.
      double resid = 0.0;
      int row = 0;
      for (int a = 0; a < d; ++a)
        for (int b = a; b < d; ++b, ++row) resid = std::max(resid, std::abs(rv(row)) / (a == b ? 1.0 : std::sqrt(2.0)));
      rep.iterations += res.evaluations;
      rep.restarts_used = k + 1;
      if (resid < best) {
        best = resid;
        bx = res.x;
      }
      if (best <= target && best <= threshold) break;
    }
    if (best > threshold)
      throw ConvergenceError("factorize: best moment residual " + std::to_string(best) + " exceeds threshold " +
                             std::to_string(threshold));
    const PolyNetwork fitted = fit.network(bx);
    const PolyNetwork fnet = f_network(fitted);
    Eigen::MatrixXd g(d, d);
    for (int a = 0; a < d; ++a)
      for (int b = a; b < d; ++b) g(a, b) = g(b, a) = (fnet.Q[a] * fnet.Q[b]).trace();
    combo = find_combo(g, r, config.rng_seed);
    rep.recovered = rotate_network(fitted, lowrank_gauge(fitted, combo.lambda, combo.mu));
  }

  rep.s_residual = pair_residual(rep.recovered, moments.S, config.sigma, config.seed);
  if (truth) {
    if (truth->kind != NetworkKind::tensor) {
      const Nondegeneracy nd = validate_nondegeneracy(f_network(*truth), combo.lambda, combo.mu);
      combo.eigengap = nd.eigengap;
      combo.min_entry = nd.min_entry;
    }
    rep.gauge_distance = gauge_distance(rep.recovered, *truth).distance;
  }
  rep.combo = combo;
  return rep;
}

std::vector<SymTensor> extend_tail_lr(const Eigen::MatrixXd& s, const SigmaMatrix& sigma,
                                      const std::vector<SymTensor>& head, int d) {
  const int dh = static_cast<int>(head.size());
  const int m = sigma.m();
  if (dh < m) throw DomainError("extend_tail_lr: head needs at least " + std::to_string(m) + " units");
  if (d < dh || s.rows() < d || s.cols() < d) throw DomainError("extend_tail_lr: S must cover all d units");
  if (d == dh) return {};
  Eigen::MatrixXd rows(dh, m);
  for (int a = 0; a < dh; ++a) {
    if (head[a].dim() != sigma.r || head[a].order() != sigma.order)
      throw DomainError("extend_tail_lr: head unit shape differs from sigma");
    rows.row(a) = head[a].values().transpose();
  }
  const Eigen::MatrixXd a = rows * sigma.weighted();
  const Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(a);
  if (qr.rank() < m) throw DegeneracyError("extend_tail_lr: head is rank deficient");
  const Eigen::MatrixXd x = qr.solve(s.block(0, dh, dh, d - dh));
  std::vector<SymTensor> tail;
  for (int b = 0; b < d - dh; ++b) tail.emplace_back(sigma.order, sigma.r, x.col(b));
  return tail;
}

AssumptionReportLR verify_assumption_lr(const PolyNetwork& net, const AssumptionLimits& limits) {
  if (net.kind != NetworkKind::lowrank) throw DomainError("verify_assumption_lr: expected a low-rank network");
  AssumptionReportLR rep;
  rep.radius = net.radius();
  const int d = net.d, r = net.r;
  auto smin = [](const Eigen::MatrixXd& m) {
    const Eigen::VectorXd sv = Eigen::JacobiSVD<Eigen::MatrixXd>(m).singularValues();
    return m.rows() < m.cols() ? 0.0 : sv(sv.size() - 1);
  };

  const auto tab = index_table(r, net.omega);
  Eigen::MatrixXd mstar(d, tab->size());
  for (int a = 0; a < d; ++a) mstar.row(a) = net.unit_sym(a).values().transpose();
  rep.sigma_min_m = smin(mstar);
  if (d < tab->size()) rep.warnings.push_back("d < C(r+omega-1, omega): sigma_min(M*) is zero by dimension count");

  const int mh = static_cast<int>(binomial(r + 1, 2));
  Eigen::MatrixXd h(d, mh);
  for (int a = 0; a < d; ++a) {
    const Eigen::VectorXd f = f_vector(net.unit(a));
    int k = 0;
    for (int i = 0; i < r; ++i)
      for (int j = i; j < r; ++j) h(a, k++) = f(i) * f(j);
  }
  rep.sigma_min_h = smin(h);
  if (d < mh) rep.warnings.push_back("d < C(r+1, 2): sigma_min(H) is zero by dimension count");

  rep.k_order = net.omega * (net.ell + 1);
  const int rl = r * net.ell;
  rep.k_cols = binomial(rl + rep.k_order - 1, rep.k_order);
  if (rep.k_cols > limits.max_cols) {
    rep.warnings.push_back("K matrix skipped: " + std::to_string(rep.k_cols) + " columns exceed the cap");
  } else {
    const auto ktab = index_table(rl, rep.k_order);
    Eigen::MatrixXd k(d, ktab->size());
    for (int a = 0; a < d; ++a) {
      Eigen::VectorXd u(rl);
      for (int t = 0; t < net.ell; ++t) u.segment(t * r, r) = net.components[a][t];
      for (int c = 0; c < ktab->size(); ++c) {
        double p = 1.0;
        for (int idx : ktab->sorted[c]) p *= u(idx);
        k(a, c) = p * std::sqrt(static_cast<double>(ktab->mult[c]));
      }
    }
    rep.sigma_min_k = Eigen::JacobiSVD<Eigen::MatrixXd>(k).singularValues().tail(1)(0);
    if (d < ktab->size()) rep.warnings.push_back("d < K columns: sigma_min(K) reported over the row space");
  }
  if (net.smoothing) {
    rep.predicted_psi = 0.1 * std::pow(net.smoothing->rho / (r * net.omega), net.omega);
    rep.flag = rep.sigma_min_h >= *rep.predicted_psi;
  }
  return rep;
}

PairMomentTable hermite_network_pair_moments(const std::vector<std::vector<double>>& coeffs,
                                             const std::vector<std::vector<Eigen::VectorXd>>& vectors, int omega) {
  if (coeffs.size() != vectors.size() || coeffs.empty())
    throw DomainError("hermite_network_pair_moments: coefficient and vector lists differ");
  const int d = static_cast<int>(coeffs.size());
  for (int a = 0; a < d; ++a) {
    if (coeffs[a].size() != vectors[a].size())
      throw DomainError("hermite_network_pair_moments: unit " + std::to_string(a) + " has mismatched terms");
    for (const auto& v : vectors[a])
      if (std::abs(v.norm() - 1.0) > 1e-8) throw DomainError("hermite_network_pair_moments: vectors must be unit");
  }
  PairMomentTable out;
  out.S.resize(d, d);
  for (int a = 0; a < d; ++a)
    for (int b = a; b < d; ++b) {
      double s = 0.0;
      for (size_t t = 0; t < coeffs[a].size(); ++t)
        for (size_t u = 0; u < coeffs[b].size(); ++u)
          s += coeffs[a][t] * coeffs[b][u] * std::pow(vectors[a][t].dot(vectors[b][u]), omega);
      out.S(a, b) = out.S(b, a) = s;
    }
  return out;
}

}  // namespace polymom
