#include "polymom/programs.hpp"

#include <cmath>
#include <string>

#include "polymom/error.hpp"

namespace polymom {

namespace {

std::vector<std::pair<int, int>> upper_pairs(int r) {
  std::vector<std::pair<int, int>> out;
  for (int i = 0; i < r; ++i)
    for (int j = i; j < r; ++j) out.emplace_back(i, j);
  return out;
}

void add_moment_match(PolynomialProgram& prog, const Polynomial& value, double target, double eta,
                      const std::string& family) {
  const Polynomial diff = value - Polynomial(target);
  if (eta == 0.0) {
    prog.add_equality(diff, family);
  } else {
    prog.add_inequality(Polynomial(eta) - diff, family);
    prog.add_inequality(Polynomial(eta) + diff, family);
  }
}

double sym_eig_min(const Eigen::MatrixXd& a) {
  return Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(a, Eigen::EigenvaluesOnly).eigenvalues()(0);
}

double sym_eig_max(const Eigen::MatrixXd& a) {
  const auto ev = Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(a, Eigen::EigenvaluesOnly).eigenvalues();
  return ev(ev.size() - 1);
}

/// m-th largest eigenvalue of a symmetric matrix (0 if m exceeds the size).
double kth_largest(const Eigen::MatrixXd& a, int m) {
  const auto ev = Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(a, Eigen::EigenvaluesOnly).eigenvalues();
  if (m > ev.size()) return 0.0;
  return ev(ev.size() - m);
}

}  // namespace

Eigen::MatrixXd psd_sqrt(const Eigen::MatrixXd& a) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(a);
  const Eigen::VectorXd s = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  return es.eigenvectors() * s.asDiagonal() * es.eigenvectors().transpose();
}

TensorRingParams tensor_ring_params(const Eigen::MatrixXd& s, int r, double eta, int degree) {
  TensorRingParams p;
  const int m = static_cast<int>(binomial(r + 1, 2));
  p.radius_sq = s.diagonal().maxCoeff() + eta;
  p.kappa = std::sqrt(std::max(kth_largest(s, m) - eta * s.rows(), 0.0) / 2.0);
  p.eta = eta;
  p.degree = degree;
  return p;
}

TensorRingProgram encode_tensor_ring(const Eigen::MatrixXd& s, const Cube& t, int r, const Combo& combo,
                                     const TensorRingParams& params) {
  const int d = static_cast<int>(s.rows());
  const int m = static_cast<int>(binomial(r + 1, 2));
  if (r < 1) throw DomainError("encode_tensor_ring: r must be positive");
  if (params.degree < 4 || params.degree % 2 != 0)
    throw DomainError("encode_tensor_ring: degree must be even and at least 4");
  if (d < m) throw DomainError("encode_tensor_ring: need d >= " + std::to_string(m));
  if (t.dim() != d || combo.lambda.size() != d || combo.mu.size() != d)
    throw DomainError("encode_tensor_ring: dimension mismatch");

  TensorRingProgram out;
  out.r = r;
  out.d = d;
  out.m = m;
  PolynomialProgram& prog = out.program;
  prog.degree = params.degree;
  for (const char* f : {"symmetry", "second_moments", "third_moments", "q_bounded", "left_inverse", "l_bounded",
                        "q_lambda_diagonal", "q_lambda_sorted", "q_mu_first_row"})
    prog.add_family(f);

  out.q.assign(d, Eigen::MatrixXi(r, r));
  for (int a = 0; a < d; ++a)
    for (int i = 0; i < r; ++i)
      for (int j = 0; j < r; ++j)
        out.q[a](i, j) = prog.add_variable("Q" + std::to_string(a) + "[" + std::to_string(i) + "," +
                                           std::to_string(j) + "]");
  out.l.resize(m, d);
  for (int k = 0; k < m; ++k)
    for (int a = 0; a < d; ++a)
      out.l(k, a) = prog.add_variable("L[" + std::to_string(k) + "," + std::to_string(a) + "]");
  auto Q = [&](int a, int i, int j) { return out.q_entry(a, i, j); };

  for (int a = 0; a < d; ++a)
    for (int i = 0; i < r; ++i)
      for (int j = i + 1; j < r; ++j) prog.add_equality(Q(a, i, j) - Q(a, j, i), "symmetry");

  for (int a = 0; a < d; ++a)
    for (int b = a; b < d; ++b) {
      Polynomial tr;
      for (int i = 0; i < r; ++i)
        for (int j = 0; j < r; ++j) tr += Q(a, i, j) * Q(b, j, i);
      add_moment_match(prog, tr, s(a, b), params.eta, "second_moments");
    }

  for (int a = 0; a < d; ++a)
    for (int b = a; b < d; ++b)
      for (int c = b; c < d; ++c) {
        Polynomial tr;
        for (int i = 0; i < r; ++i)
          for (int j = 0; j < r; ++j)
            for (int k = 0; k < r; ++k) tr += Q(a, i, j) * Q(b, j, k) * Q(c, k, i);
        add_moment_match(prog, tr, t(a, b, c), params.eta, "third_moments");
      }

  for (int a = 0; a < d; ++a) {
    Polynomial norm;
    for (int i = 0; i < r; ++i)
      for (int j = 0; j < r; ++j) norm += Q(a, i, j) * Q(a, i, j);
    prog.add_inequality(Polynomial(params.radius_sq) - norm, "q_bounded");
  }

  const auto pairs = upper_pairs(r);
  for (int k = 0; k < m; ++k)
    for (int p = 0; p < m; ++p) {
      Polynomial e(k == p ? -1.0 : 0.0);
      for (int a = 0; a < d; ++a) e += Polynomial::variable(out.l(k, a)) * Q(a, pairs[p].first, pairs[p].second);
      prog.add_equality(e, "left_inverse");
    }

  {
    Polynomial norm;
    for (int k = 0; k < m; ++k)
      for (int a = 0; a < d; ++a) norm += Polynomial::variable(out.l(k, a)) * Polynomial::variable(out.l(k, a));
    const double kappa = std::max(params.kappa, 1e-300);
    prog.add_inequality(Polynomial(static_cast<double>(r) * r / (kappa * kappa)) - norm, "l_bounded");
  }

  auto combo_entry = [&](const Eigen::VectorXd& w, int i, int j) {
    Polynomial p;
    for (int a = 0; a < d; ++a)
      if (w(a) != 0.0) p += Q(a, i, j) * w(a);
    return p;
  };
  for (int i = 0; i < r; ++i)
    for (int j = i + 1; j < r; ++j) prog.add_equality(combo_entry(combo.lambda, i, j), "q_lambda_diagonal");
  for (int i = 0; i < r; ++i)
    for (int j = i + 1; j < r; ++j)
      prog.add_inequality(combo_entry(combo.lambda, j, j) - combo_entry(combo.lambda, i, i), "q_lambda_sorted");
  for (int j = 1; j < r; ++j) prog.add_inequality(combo_entry(combo.mu, 0, j), "q_mu_first_row");

  std::vector<int> qvars, all;
  for (int a = 0; a < d; ++a)
    for (int i = 0; i < r; ++i)
      for (int j = 0; j < r; ++j) qvars.push_back(out.q[a](i, j));
  all = qvars;
  for (int k = 0; k < m; ++k)
    for (int a = 0; a < d; ++a) all.push_back(out.l(k, a));
  prog.groups.push_back({qvars, params.degree});
  prog.groups.push_back({all, 2});
  prog.validate();
  return out;
}

Eigen::VectorXd TensorRingProgram::point(const PolyNetwork& net) const {
  if (net.kind != NetworkKind::quadratic || net.r != r || net.d != d)
    throw DomainError("tensor ring point: network shape mismatch");
  Eigen::VectorXd x = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(program.variables.size()));
  const auto pairs = upper_pairs(r);
  Eigen::MatrixXd mm(d, m);
  for (int a = 0; a < d; ++a) {
    for (int i = 0; i < r; ++i)
      for (int j = 0; j < r; ++j) x(q[a](i, j)) = net.Q[a](i, j);
    for (int k = 0; k < m; ++k) mm(a, k) = net.Q[a](pairs[k].first, pairs[k].second);
  }
  const Eigen::MatrixXd linv = mm.completeOrthogonalDecomposition().pseudoInverse();
  for (int k = 0; k < m; ++k)
    for (int a = 0; a < d; ++a) x(l(k, a)) = linv(k, a);
  return x;
}

LowRankParams lowrank_params(const Eigen::MatrixXd& s, const SigmaMatrix& sigma, int ell, double eta, int degree) {
  LowRankParams p;
  p.ell = ell;
  p.eta = eta;
  p.degree = degree;
  const Eigen::VectorXd sq = sigma.mult.cwiseSqrt();
  const Eigen::MatrixXd half = sq.asDiagonal() * sigma.sym * sq.asDiagonal();
  p.radius_sq = (s.diagonal().maxCoeff() + eta) / sym_eig_min(half);
  const double top = sym_eig_max(sigma.weighted());
  p.kappa = std::sqrt(std::max(kth_largest(s, sigma.m()) - eta * s.rows(), 0.0) / top);
  return p;
}

Polynomial LowRankProgram::t_sorted(int a, int pos) const {
  const auto tab = index_table(r, omega);
  return Polynomial::variable(t[a][tab->sorted_to_dense[pos]]);
}

std::vector<Polynomial> LowRankProgram::f_polys(int a) const {
  if (omega % 2 == 0) throw DomainError("f-vector needs odd order");
  const int half = omega / 2;
  std::vector<Polynomial> f(r);
  const std::int64_t combos = ipow(r, half);
  for (int k = 0; k < r; ++k)
    for (std::int64_t c = 0; c < combos; ++c) {
      Index idx;
      std::int64_t rem = c;
      std::vector<int> js(half);
      for (int h = half - 1; h >= 0; --h) {
        js[h] = static_cast<int>(rem % r);
        rem /= r;
      }
      for (int j : js) {
        idx.push_back(j);
        idx.push_back(j);
      }
      idx.push_back(k);
      f[k] += Polynomial::variable(t[a][dense_offset(idx, r)]);
    }
  return f;
}

LowRankProgram encode_lowrank(const Eigen::MatrixXd& s, const SigmaMatrix& sigma, int omega,
                              const LowRankParams& params, const std::optional<Combo>& combo) {
  const int d = static_cast<int>(s.rows());
  const int r = sigma.r;
  if (omega % 2 == 0 || omega < 1) throw DomainError("encode_lowrank: ω must be odd");
  if (sigma.order != omega) throw DomainError("encode_lowrank: Σ order differs from ω");
  if (params.degree < 2 * omega || params.degree % 2 != 0)
    throw DomainError("encode_lowrank: degree must be even and at least 2ω");
  if (params.ell < 1) throw DomainError("encode_lowrank: ℓ must be positive");
  const auto tab = index_table(r, omega);
  const int m = tab->size();
  if (d < m) throw DomainError("encode_lowrank: need d >= " + std::to_string(m));
  if (combo && (combo->lambda.size() != d || combo->mu.size() != d))
    throw DomainError("encode_lowrank: combination length differs from d");

  LowRankProgram out;
  out.r = r;
  out.d = d;
  out.omega = omega;
  out.ell = params.ell;
  out.m = m;
  PolynomialProgram& prog = out.program;
  prog.degree = params.degree;
  for (const char* f : {"symmetry", "second_moments", "low_rank", "t_bounded", "left_inverse", "inverse_p",
                        "l_bounded", "p_bounded"})
    prog.add_family(f);
  if (combo)
    for (const char* f : {"f_lambda_diagonal", "f_lambda_sorted", "f_mu_first_row"}) prog.add_family(f);

  auto index_name = [](const Index& i) {
    std::string s;
    for (size_t k = 0; k < i.size(); ++k) s += (k ? "," : "") + std::to_string(i[k]);
    return s;
  };
  const std::int64_t dense = tab->dense_size();
  out.t.assign(d, std::vector<int>(dense));
  out.v.assign(d, std::vector<std::vector<int>>(params.ell, std::vector<int>(r)));
  for (int a = 0; a < d; ++a) {
    for (std::int64_t o = 0; o < dense; ++o) {
      Index i(omega);
      std::int64_t rem = o;
      for (int k = omega - 1; k >= 0; --k) {
        i[k] = static_cast<int>(rem % r);
        rem /= r;
      }
      out.t[a][o] = prog.add_variable("T" + std::to_string(a) + "[" + index_name(i) + "]");
    }
    for (int q = 0; q < params.ell; ++q)
      for (int k = 0; k < r; ++k)
        out.v[a][q][k] =
            prog.add_variable("v" + std::to_string(a) + "_" + std::to_string(q) + "[" + std::to_string(k) + "]");
  }
  out.l.resize(m, d);
  out.p.resize(m, d);
  for (int k = 0; k < m; ++k)
    for (int a = 0; a < d; ++a)
      out.l(k, a) = prog.add_variable("L[" + std::to_string(k) + "," + std::to_string(a) + "]");
  for (int k = 0; k < m; ++k)
    for (int a = 0; a < d; ++a)
      out.p(k, a) = prog.add_variable("P[" + std::to_string(k) + "," + std::to_string(a) + "]");

  for (int a = 0; a < d; ++a)
    for (std::int64_t o = 0; o < dense; ++o) {
      const int pos = tab->dense_to_sorted[o];
      const std::int64_t rep = tab->sorted_to_dense[pos];
      if (rep != o)
        prog.add_equality(Polynomial::variable(out.t[a][o]) - Polynomial::variable(out.t[a][rep]), "symmetry");
    }

  const Eigen::MatrixXd g = sigma.weighted();
  for (int a = 0; a < d; ++a)
    for (int b = a; b < d; ++b) {
      Polynomial ip;
      for (int i = 0; i < m; ++i)
        for (int j = 0; j < m; ++j)
          if (g(i, j) != 0.0) ip += out.t_sorted(a, i) * out.t_sorted(b, j) * g(i, j);
      add_moment_match(prog, ip, s(a, b), params.eta, "second_moments");
    }

  for (int a = 0; a < d; ++a)
    for (int i = 0; i < m; ++i) {
      Polynomial e = out.t_sorted(a, i);
      for (int q = 0; q < params.ell; ++q) {
        Polynomial prod(1.0);
        for (int k : tab->sorted[i]) prod = prod * Polynomial::variable(out.v[a][q][k]);
        e -= prod;
      }
      prog.add_equality(e, "low_rank");
    }

  for (int a = 0; a < d; ++a) {
    Polynomial norm;
    for (std::int64_t o = 0; o < dense; ++o)
      norm += Polynomial::variable(out.t[a][o]) * Polynomial::variable(out.t[a][o]);
    prog.add_inequality(Polynomial(params.radius_sq) - norm, "t_bounded");
  }

  for (int k = 0; k < m; ++k)
    for (int p = 0; p < m; ++p) {
      Polynomial e(k == p ? -1.0 : 0.0);
      for (int a = 0; a < d; ++a) e += Polynomial::variable(out.l(k, a)) * out.t_sorted(a, p);
      prog.add_equality(e, "left_inverse");
    }

  const Eigen::MatrixXd w = sigma.mult.asDiagonal() * psd_sqrt(sigma.sym);
  for (int k = 0; k < m; ++k)
    for (int p = 0; p < m; ++p) {
      Polynomial e(k == p ? -1.0 : 0.0);
      for (int a = 0; a < d; ++a)
        for (int i = 0; i < m; ++i)
          if (w(i, p) != 0.0) e += Polynomial::variable(out.p(k, a)) * out.t_sorted(a, i) * w(i, p);
      prog.add_equality(e, "inverse_p");
    }

  const double kappa = std::max(params.kappa, 1e-300);
  const double rw = std::pow(static_cast<double>(r), omega);
  Polynomial nl, np;
  for (int k = 0; k < m; ++k)
    for (int a = 0; a < d; ++a) {
      nl += Polynomial::variable(out.l(k, a)) * Polynomial::variable(out.l(k, a));
      np += Polynomial::variable(out.p(k, a)) * Polynomial::variable(out.p(k, a));
    }
  prog.add_inequality(Polynomial(rw / (kappa * kappa)) - nl, "l_bounded");
  prog.add_inequality(Polynomial(rw * std::pow(omega, omega / 2.0) / (kappa * kappa)) - np, "p_bounded");

  if (combo) {
    std::vector<std::vector<Polynomial>> f(d);
    for (int a = 0; a < d; ++a) f[a] = out.f_polys(a);
    auto fentry = [&](const Eigen::VectorXd& wt, int i, int j) {
      Polynomial e;
      for (int a = 0; a < d; ++a)
        if (wt(a) != 0.0) e += f[a][i] * f[a][j] * wt(a);
      return e;
    };
    for (int i = 0; i < r; ++i)
      for (int j = i + 1; j < r; ++j) prog.add_equality(fentry(combo->lambda, i, j), "f_lambda_diagonal");
    for (int i = 0; i < r; ++i)
      for (int j = i + 1; j < r; ++j)
        prog.add_inequality(fentry(combo->lambda, j, j) - fentry(combo->lambda, i, i), "f_lambda_sorted");
    for (int j = 1; j < r; ++j) prog.add_inequality(fentry(combo->mu, 0, j), "f_mu_first_row");
  }

  std::vector<int> tvars;
  for (int a = 0; a < d; ++a) tvars.insert(tvars.end(), out.t[a].begin(), out.t[a].end());
  prog.groups.push_back({tvars, 4});
  for (int a = 0; a < d; ++a) {
    std::vector<int> vs = out.t[a];
    for (const auto& comp : out.v[a]) vs.insert(vs.end(), comp.begin(), comp.end());
    prog.groups.push_back({vs, params.degree});
  }
  std::vector<int> lp = tvars;
  for (int k = 0; k < m; ++k)
    for (int a = 0; a < d; ++a) {
      lp.push_back(out.l(k, a));
      lp.push_back(out.p(k, a));
    }
  prog.groups.push_back({lp, 2});
  prog.validate();
  return out;
}

Eigen::VectorXd LowRankProgram::point(const PolyNetwork& net, const SigmaMatrix& sigma) const {
  if (net.kind != NetworkKind::lowrank || net.r != r || net.d != d || net.omega != omega || net.ell != ell)
    throw DomainError("low-rank point: network shape mismatch");
  Eigen::VectorXd x = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(program.variables.size()));
  Eigen::MatrixXd mm(d, m);
  for (int a = 0; a < d; ++a) {
    const DenseTensor u = net.unit(a);
    for (size_t o = 0; o < t[a].size(); ++o) x(t[a][o]) = u.values()(static_cast<Eigen::Index>(o));
    const SymTensor us = net.unit_sym(a);
    mm.row(a) = us.values().transpose();
    for (int q = 0; q < ell; ++q)
      for (int k = 0; k < r; ++k) x(v[a][q][k]) = net.components[a][q](k);
  }
  const Eigen::MatrixXd w = sigma.mult.asDiagonal() * psd_sqrt(sigma.sym);
  const Eigen::MatrixXd linv = mm.completeOrthogonalDecomposition().pseudoInverse();
  const Eigen::MatrixXd pinv = (mm * w).completeOrthogonalDecomposition().pseudoInverse();
  for (int k = 0; k < m; ++k)
    for (int a = 0; a < d; ++a) {
      x(l(k, a)) = linv(k, a);
      x(p(k, a)) = pinv(k, a);
    }
  return x;
}

}  // namespace polymom
