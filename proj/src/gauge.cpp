#include "polymom/gauge.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <utility>

#include "polymom/error.hpp"
#include "polymom/lsq.hpp"
#include "polymom/rng.hpp"

namespace polymom {

namespace {

struct Pair {
  int r = 0;
  int order = 0;
  std::vector<DenseTensor> a;
  std::vector<DenseTensor> b;

  // Stacked F_U(A_a) − B_a.
  Eigen::VectorXd residual(const Eigen::MatrixXd& u) const {
    const auto n = a.front().values().size();
    Eigen::VectorXd out(n * static_cast<Eigen::Index>(a.size()));
    for (size_t k = 0; k < a.size(); ++k) {
      if (order == 2) {
        const Eigen::MatrixXd q = u * to_matrix(a[k]) * u.transpose();
        out.segment(k * n, n) = vec(q) - b[k].values();
      } else {
        out.segment(k * n, n) = rotate_tensor(u, a[k]).values() - b[k].values();
      }
    }
    return out;
  }

  double sum_sq(const Eigen::MatrixXd& u) const { return residual(u).squaredNorm(); }

  double max_norm(const Eigen::MatrixXd& u) const {
    const Eigen::VectorXd res = residual(u);
    const auto n = a.front().values().size();
    double m = 0.0;
    for (size_t k = 0; k < a.size(); ++k) m = std::max(m, res.segment(k * n, n).norm());
    return m;
  }
};

Eigen::MatrixXd skew(const Eigen::VectorXd& theta, int r) {
  Eigen::MatrixXd k = Eigen::MatrixXd::Zero(r, r);
  int p = 0;
  for (int i = 0; i < r; ++i)
    for (int j = i + 1; j < r; ++j) {
      k(i, j) = theta(p);
      k(j, i) = -theta(p);
      ++p;
    }
  return k;
}

Eigen::MatrixXd cayley(const Eigen::MatrixXd& u0, const Eigen::VectorXd& theta) {
  const int r = static_cast<int>(u0.rows());
  const Eigen::MatrixXd k = skew(theta, r);
  const Eigen::MatrixXd id = Eigen::MatrixXd::Identity(r, r);
  return u0 * (id - 0.5 * k).partialPivLu().solve(id + 0.5 * k);
}

// Re-orthogonalize to remove drift from the linear solve.
Eigen::MatrixXd polar(const Eigen::MatrixXd& u) {
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(u, Eigen::ComputeFullU | Eigen::ComputeFullV);
  return svd.matrixU() * svd.matrixV().transpose();
}

Eigen::MatrixXd refine(const Pair& p, const Eigen::MatrixXd& u0) {
  const int r = p.r;
  const int n = r * (r - 1) / 2;
  if (n == 0) return u0;
  LsqProblem prob;
  prob.n_params = n;
  prob.n_residuals = static_cast<int>(p.residual(u0).size());
  prob.residual = [&](const Eigen::VectorXd& th, Eigen::VectorXd& out) { out = p.residual(cayley(u0, th)); };
  LsqOptions opt;
  opt.max_evaluations = 400;
  opt.fd_step = 1e-7;
  const LsqResult res = solve_lsq(prob, Eigen::VectorXd::Zero(n), opt);
  Eigen::MatrixXd u = polar(cayley(u0, res.x));
  return p.sum_sq(u) <= p.sum_sq(u0) ? u : u0;
}

// Nelder–Mead on max_a ‖F_U(A_a) − B_a‖ over the Cayley chart at u0.
Eigen::MatrixXd minimax_polish(const Pair& p, const Eigen::MatrixXd& u0, double scale) {
  const int r = p.r;
  const int n = r * (r - 1) / 2;
  if (n == 0) return u0;
  auto f = [&](const Eigen::VectorXd& th) { return p.max_norm(cayley(u0, th)); };
  std::vector<Eigen::VectorXd> x(n + 1, Eigen::VectorXd::Zero(n));
  for (int i = 0; i < n; ++i) x[i + 1](i) = scale;
  std::vector<double> fx(n + 1);
  for (int i = 0; i <= n; ++i) fx[i] = f(x[i]);
  std::vector<int> order(n + 1);
  for (int evals = n + 1; evals < 4000;) {
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](int i, int j) { return fx[i] < fx[j]; });
    const int lo = order.front(), hi = order.back(), second = order[n - 1];
    double size = 0.0;
    for (int i = 0; i <= n; ++i) size = std::max(size, (x[i] - x[lo]).cwiseAbs().maxCoeff());
    if (size < 1e-13 || fx[hi] - fx[lo] <= 1e-16 * std::max(1.0, fx[lo])) break;
    Eigen::VectorXd centroid = Eigen::VectorXd::Zero(n);
    for (int i = 0; i <= n; ++i)
      if (i != hi) centroid += x[i] / n;
    const Eigen::VectorXd xr = centroid + (centroid - x[hi]);
    const double fr = f(xr);
    ++evals;
    if (fr < fx[lo]) {
      const Eigen::VectorXd xe = centroid + 2.0 * (centroid - x[hi]);
      const double fe = f(xe);
      ++evals;
      if (fe < fr) {
        x[hi] = xe;
        fx[hi] = fe;
      } else {
        x[hi] = xr;
        fx[hi] = fr;
      }
      continue;
    }
    if (fr < fx[second]) {
      x[hi] = xr;
      fx[hi] = fr;
      continue;
    }
    const Eigen::VectorXd xc = fr < fx[hi] ? Eigen::VectorXd(centroid + 0.5 * (xr - centroid))
                                           : Eigen::VectorXd(centroid + 0.5 * (x[hi] - centroid));
    const double fc = f(xc);
    ++evals;
    if (fc < std::min(fr, fx[hi])) {
      x[hi] = xc;
      fx[hi] = fc;
      continue;
    }
    for (int i = 0; i <= n; ++i) {
      if (i == lo) continue;
      x[i] = x[lo] + 0.5 * (x[i] - x[lo]);
      fx[i] = f(x[i]);
      ++evals;
    }
  }
  const int best = static_cast<int>(std::min_element(fx.begin(), fx.end()) - fx.begin());
  return polar(cayley(u0, x[best]));
}

Eigen::MatrixXd generic_summary(const std::vector<DenseTensor>& units, const Eigen::VectorXd& c) {
  Eigen::MatrixXd e = Eigen::MatrixXd::Zero(units.front().dim(), units.front().dim());
  for (size_t k = 0; k < units.size(); ++k) e += c(static_cast<Eigen::Index>(k)) * equivariant_matrix(units[k]);
  return 0.5 * (e + e.transpose());
}

std::vector<Eigen::MatrixXd> eigen_candidates(const Pair& p, Stream& rng) {
  const int r = p.r;
  const Eigen::VectorXd c = rng.normal_vector(static_cast<int>(p.a.size()));
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> ea(generic_summary(p.a, c));
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eb(generic_summary(p.b, c));
  const Eigen::MatrixXd& pa = ea.eigenvectors();
  const Eigen::MatrixXd& pb = eb.eigenvectors();
  std::vector<Eigen::MatrixXd> out;
  std::vector<int> perm(r);
  std::iota(perm.begin(), perm.end(), 0);
  const bool permute = r <= 4;
  const int sign_bits = std::min(r, 10);
  do {
    Eigen::MatrixXd pbp(r, r);
    for (int j = 0; j < r; ++j) pbp.col(j) = pb.col(perm[j]);
    for (int mask = 0; mask < (1 << sign_bits); ++mask) {
      Eigen::MatrixXd s = pbp;
      for (int j = 0; j < sign_bits; ++j)
        if (mask & (1 << j)) s.col(j) *= -1.0;
      out.push_back(s * pa.transpose());
    }
  } while (permute && std::next_permutation(perm.begin(), perm.end()));
  return out;
}

std::vector<Eigen::MatrixXd> grid_candidates(int r, double step) {
  std::vector<Eigen::MatrixXd> out;
  if (r == 1) {
    out.push_back(Eigen::MatrixXd::Constant(1, 1, 1.0));
    out.push_back(Eigen::MatrixXd::Constant(1, 1, -1.0));
    return out;
  }
  const double two_pi = 2.0 * std::acos(-1.0);
  const int steps = static_cast<int>(std::ceil(two_pi / step));
  for (int k = 0; k < steps; ++k) {
    const double t = k * step;
    Eigen::MatrixXd rot(2, 2);
    rot << std::cos(t), -std::sin(t), std::sin(t), std::cos(t);
    out.push_back(rot);
    Eigen::MatrixXd ref = rot;
    ref.col(1) *= -1.0;
    out.push_back(ref);
  }
  return out;
}

}  // namespace

double aligned_distance(const PolyNetwork& a, const PolyNetwork& b, const Eigen::MatrixXd& u) {
  Pair p{a.r, a.omega, a.units(), b.units()};
  return p.max_norm(u);
}

Alignment gauge_distance(const PolyNetwork& a, const PolyNetwork& b, const AlignConfig& cfg) {
  if (a.r != b.r || a.d != b.d || a.omega != b.omega) throw DomainError("gauge_distance: networks differ in (r, d, omega)");
  Pair p{a.r, a.omega, a.units(), b.units()};
  const int r = a.r;
  Stream rng(cfg.rng_seed, 0x6a);

  std::vector<Eigen::MatrixXd> structured;
  structured.push_back(Eigen::MatrixXd::Identity(r, r));
  for (auto& u : eigen_candidates(p, rng)) structured.push_back(std::move(u));
  if (r <= 2)
    for (auto& u : grid_candidates(r, cfg.grid_step)) structured.push_back(std::move(u));

  std::vector<std::pair<double, int>> scored, scored_max;
  scored.reserve(structured.size());
  for (size_t k = 0; k < structured.size(); ++k) {
    scored.emplace_back(p.sum_sq(structured[k]), static_cast<int>(k));
    scored_max.emplace_back(p.max_norm(structured[k]), static_cast<int>(k));
  }
  const int top = std::min<int>(cfg.refine_top, static_cast<int>(scored.size()));
  std::partial_sort(scored.begin(), scored.begin() + top, scored.end());
  std::partial_sort(scored_max.begin(), scored_max.begin() + top, scored_max.end());

  Eigen::MatrixXd best = structured[scored.front().second];
  double best_val = p.max_norm(best);
  auto consider = [&](const Eigen::MatrixXd& u) {
    const double v = p.max_norm(u);
    if (v < best_val) {
      best_val = v;
      best = u;
    }
  };
  // The least-squares polish targets the sum over units; each local optimum is
  // then finished on the max itself.
  std::vector<Eigen::MatrixXd> seeds;
  for (int k = 0; k < top; ++k) {
    consider(structured[scored[k].second]);
    seeds.push_back(refine(p, structured[scored[k].second]));
    seeds.push_back(structured[scored_max[k].second]);
  }
  for (int k = 0; k < cfg.restarts; ++k) seeds.push_back(refine(p, random_orthogonal(r, rng)));
  for (const auto& u : seeds) consider(u);
  const double exact = 1e-12 * std::max(1.0, best_val);
  for (const auto& u : seeds) {
    if (best_val <= exact) break;
    // Restarting the simplex lets it leave kinks of the max where it stalls.
    Eigen::MatrixXd v = u;
    double fv = p.max_norm(v);
    for (int round = 0; round < 20; ++round) {
      const Eigen::MatrixXd w = minimax_polish(p, v, 2.0 * cfg.grid_step);
      const double fw = p.max_norm(w);
      if (!(fw < fv - 1e-15 * std::max(1.0, fv))) break;
      v = w;
      fv = fw;
    }
    consider(v);
  }
  return {best_val, GaugeRotation(polar(best))};
}

}  // namespace polymom
