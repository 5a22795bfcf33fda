#include "polymom/relaxation.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <iostream>
#include <ostream>
#include <limits>
#include <set>
#include <tuple>

#include <Eigen/Sparse>

#include "polymom/error.hpp"

namespace polymom {

int PolynomialProgram::add_variable(std::string name) {
  variables.push_back(std::move(name));
  return static_cast<int>(variables.size()) - 1;
}

void PolynomialProgram::add_family(const std::string& family) {
  if (std::find(families.begin(), families.end(), family) == families.end()) families.push_back(family);
}

void PolynomialProgram::add_equality(Polynomial p, const std::string& family) {
  add_family(family);
  equalities.push_back({std::move(p), family});
}

void PolynomialProgram::add_inequality(Polynomial p, const std::string& family) {
  add_family(family);
  inequalities.push_back({std::move(p), family});
}

std::vector<std::pair<std::string, int>> PolynomialProgram::family_counts() const {
  std::vector<std::pair<std::string, int>> out;
  for (const auto& f : families) {
    int n = 0;
    for (const auto& c : equalities) n += c.family == f;
    for (const auto& c : inequalities) n += c.family == f;
    out.emplace_back(f, n);
  }
  return out;
}

void PolynomialProgram::validate() const {
  if (degree < 2 || degree % 2 != 0) throw DomainError("relaxation degree must be even and >= 2");
  const int n = static_cast<int>(variables.size());
  auto check = [&](const Constraint& c) {
    if (c.p.degree() > degree)
      throw DomainError("constraint of family '" + c.family + "' has degree " + std::to_string(c.p.degree()) +
                        " above the relaxation degree " + std::to_string(degree));
    for (int v : c.p.variables())
      if (v < 0 || v >= n) throw DomainError("constraint references an undeclared variable");
  };
  for (const auto& c : equalities) check(c);
  for (const auto& c : inequalities) check(c);
  for (const auto& g : groups) {
    if (g.degree < 2 || g.degree % 2 != 0) throw DomainError("group degree must be even and >= 2");
    for (int v : g.vars)
      if (v < 0 || v >= n) throw DomainError("group references an undeclared variable");
  }
}

double PolynomialProgram::max_violation(const Eigen::VectorXd& point) const {
  double worst = 0.0;
  for (const auto& c : equalities) worst = std::max(worst, std::abs(c.p.evaluate(point)));
  for (const auto& c : inequalities) worst = std::max(worst, -c.p.evaluate(point));
  return worst;
}

namespace {

using Subs = std::map<int, Polynomial>;

Polynomial clean(const Polynomial& p) {
  double scale = 0.0;
  for (const auto& [m, c] : p.terms()) scale = std::max(scale, std::abs(c));
  return p.pruned(1e-14 * scale);
}

// Substitutions are kept fully reduced, so one pass over p's variables suffices.
Polynomial apply_subs(const Polynomial& p, const Subs& subs) {
  Polynomial q = p;
  for (int v : p.variables()) {
    auto it = subs.find(v);
    if (it != subs.end()) q = q.substitute(v, it->second);
  }
  return clean(q);
}

struct Presolved {
  Subs subs;
  std::vector<Polynomial> eqs;
  std::vector<Polynomial> ineqs;
  bool inconsistent = false;
};

// Eliminates variables through linear equalities (symmetry, gauge, fixed values).
Presolved presolve(const PolynomialProgram& prog) {
  Presolved out;
  std::vector<bool> used(prog.equalities.size(), false);
  bool changed = true;
  while (changed) {
    changed = false;
    for (size_t k = 0; k < prog.equalities.size(); ++k) {
      if (used[k]) continue;
      const Polynomial q = apply_subs(prog.equalities[k].p, out.subs);
      if (q.is_zero()) {
        used[k] = true;
        continue;
      }
      if (q.degree() == 0) {
        out.inconsistent = true;
        return out;
      }
      if (q.degree() != 1) continue;
      int pivot = -1;
      double best = 0.0;
      for (int v : q.variables()) {
        const double c = std::abs(q.linear_coefficient(v));
        if (c >= best) {
          best = c;
          pivot = v;
        }
      }
      const double cp = q.linear_coefficient(pivot);
      const Polynomial sub = clean((q - Polynomial::variable(pivot) * cp) * (-1.0 / cp));
      for (auto& [v, s] : out.subs) s = clean(s.substitute(pivot, sub));
      out.subs[pivot] = sub;
      used[k] = true;
      changed = true;
    }
  }
  auto push_unique = [](std::vector<Polynomial>& list, Polynomial q) {
    for (const auto& e : list)
      if (e == q) return;
    list.push_back(std::move(q));
  };
  for (size_t k = 0; k < prog.equalities.size(); ++k) {
    if (used[k]) continue;
    Polynomial q = apply_subs(prog.equalities[k].p, out.subs);
    if (q.is_zero()) continue;
    if (q.degree() == 0) {
      out.inconsistent = true;
      return out;
    }
    push_unique(out.eqs, std::move(q));
  }
  for (const auto& c : prog.inequalities) {
    Polynomial q = apply_subs(c.p, out.subs);
    if (q.degree() == 0) {
      if (q.constant() < -1e-12) {
        out.inconsistent = true;
        return out;
      }
      continue;
    }
    push_unique(out.ineqs, std::move(q));
  }
  return out;
}

using Row = std::vector<std::pair<Monomial, double>>;

struct BlockSpec {
  int side = 0;
  bool moment = false;
  int group = -1;
  std::vector<Monomial> basis;
  std::vector<Row> entries;  // upper triangle, row-major over i <= j
};

bool subset(const std::vector<int>& a, const std::vector<int>& b) {
  return std::includes(b.begin(), b.end(), a.begin(), a.end());
}

Row times(const Monomial& m, const Polynomial& q) {
  Row row;
  for (const auto& [t, c] : q.terms()) row.emplace_back(m * t, c);
  return row;
}

struct Assembled {
  std::vector<Row> rows;
  std::vector<double> rhs;
  std::vector<BlockSpec> blocks;
  std::vector<std::vector<Monomial>> bases;
  std::vector<std::vector<int>> gvars;
  /// Reduced equalities localized in each group.
  std::vector<std::vector<Polynomial>> home_eqs;
};

Assembled assemble(const PolynomialProgram& prog, const Presolved& pre, const SolverConfig& cfg) {
  Assembled out;
  std::vector<PolynomialProgram::Group> groups = prog.groups;
  if (groups.empty()) {
    PolynomialProgram::Group g;
    for (int v = 0; v < static_cast<int>(prog.variables.size()); ++v) g.vars.push_back(v);
    g.degree = prog.degree;
    groups.push_back(g);
  }
  std::vector<std::vector<int>> gvars;
  for (const auto& g : groups) {
    std::vector<int> vs;
    for (int v : g.vars) {
      auto it = pre.subs.find(v);
      if (it == pre.subs.end()) {
        vs.push_back(v);
      } else {
        const auto w = it->second.variables();
        vs.insert(vs.end(), w.begin(), w.end());
      }
    }
    std::sort(vs.begin(), vs.end());
    vs.erase(std::unique(vs.begin(), vs.end()), vs.end());
    gvars.push_back(std::move(vs));
  }

  out.gvars = gvars;
  out.home_eqs.resize(groups.size());
  out.rows.push_back({{Monomial{}, 1.0}});
  out.rhs.push_back(1.0);

  auto localizing = [&](const std::vector<Monomial>& basis, const Polynomial& q, bool moment, int group) {
    const int s = static_cast<int>(basis.size());
    if (s > cfg.max_dim) throw ResourceError("moment matrix side " + std::to_string(s) + " exceeds max_dim");
    BlockSpec b;
    b.side = s;
    b.moment = moment;
    b.group = group;
    b.basis = basis;
    for (int i = 0; i < s; ++i)
      for (int j = i; j < s; ++j) b.entries.push_back(times(basis[i] * basis[j], q));
    out.blocks.push_back(std::move(b));
  };

  for (size_t g = 0; g < groups.size(); ++g) {
    auto basis = monomial_basis(gvars[g], groups[g].degree / 2);
    localizing(basis, Polynomial(1.0), true, static_cast<int>(g));
    out.bases.push_back(std::move(basis));
  }

  auto home = [&](const Polynomial& q) -> int {
    const auto vs = q.variables();
    for (size_t g = 0; g < groups.size(); ++g)
      if (q.degree() <= groups[g].degree && subset(vs, gvars[g])) return static_cast<int>(g);
    return -1;
  };

  for (const auto& q : pre.eqs) {
    const int g = home(q);
    if (g < 0) {
      out.rows.push_back(times({}, q));
      out.rhs.push_back(0.0);
      continue;
    }
    out.home_eqs[g].push_back(q);
    for (const auto& m : monomial_basis(gvars[g], groups[g].degree - q.degree())) {
      out.rows.push_back(times(m, q));
      out.rhs.push_back(0.0);
    }
  }
  for (const auto& q : pre.ineqs) {
    const int g = home(q);
    if (g < 0) {
      localizing({Monomial{}}, q, false, -1);
      continue;
    }
    localizing(monomial_basis(gvars[g], (groups[g].degree - q.degree()) / 2), q, false, g);
  }
  return out;
}

// Symmetric-vector packing with √2 on off-diagonals so that ‖X‖_F = ‖svec X‖.
Eigen::MatrixXd unpack(const Eigen::Ref<const Eigen::VectorXd>& v, int s) {
  static const double inv = 1.0 / std::sqrt(2.0);
  Eigen::MatrixXd m(s, s);
  int k = 0;
  for (int i = 0; i < s; ++i)
    for (int j = i; j < s; ++j) {
      const double x = i == j ? v(k) : v(k) * inv;
      m(i, j) = x;
      m(j, i) = x;
      ++k;
    }
  return m;
}

void pack(const Eigen::MatrixXd& m, Eigen::Ref<Eigen::VectorXd> v) {
  static const double r2 = std::sqrt(2.0);
  const auto s = static_cast<int>(m.rows());
  int k = 0;
  for (int i = 0; i < s; ++i)
    for (int j = i; j < s; ++j) v(k++) = i == j ? m(i, i) : r2 * m(i, j);
}

void project_psd(const Eigen::Ref<const Eigen::VectorXd>& in, Eigen::Ref<Eigen::VectorXd> out, int s) {
  if (s == 1) {
    out(0) = std::max(in(0), 0.0);
    return;
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(unpack(in, s));
  const Eigen::VectorXd lam = es.eigenvalues().cwiseMax(0.0);
  const Eigen::MatrixXd& v = es.eigenvectors();
  pack(v * lam.asDiagonal() * v.transpose(), out);
}


struct Layout {
  std::vector<int> offset;
  std::vector<int> side;
  int len(size_t k) const { return side[k] * (side[k] + 1) / 2; }
};

struct IpmState {
  Eigen::VectorXd z;
  Eigen::VectorXd s;
  Eigen::VectorXd w;
  int iterations = 0;
};

double max_step(const Eigen::MatrixXd& x, const Eigen::MatrixXd& dx) {
  if (x.rows() == 1) return dx(0, 0) < 0.0 ? -x(0, 0) / dx(0, 0) : std::numeric_limits<double>::infinity();
  Eigen::LLT<Eigen::MatrixXd> llt(x);
  if (llt.info() != Eigen::Success) return 0.0;
  const Eigen::MatrixXd l = llt.matrixL();
  Eigen::MatrixXd m = l.triangularView<Eigen::Lower>().solve(dx);
  m = l.triangularView<Eigen::Lower>().solve(m.transpose()).transpose();
  const double lo = Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(0.5 * (m + m.transpose()), Eigen::EigenvaluesOnly)
                        .eigenvalues()(0);
  return lo < 0.0 ? -1.0 / lo : std::numeric_limits<double>::infinity();
}

/**
 * Mehrotra predictor-corrector with the HKM direction for
 *   min cᵀz  s.t.  S = x0 + G z ⪰ 0,   dual  Gᵀ W = c, W ⪰ 0.
 * Blocks are packed as svec; side-1 blocks are handled as scalars.
 */
IpmState interior_point(const Eigen::MatrixXd& g, const Eigen::VectorXd& x0, const Eigen::VectorXd& c,
                        const Layout& lay, int max_iter, double eps, bool log) {
  const int nfree = static_cast<int>(g.cols());
  const size_t nb = lay.side.size();
  double nu = 0.0;
  for (int s : lay.side) nu += s;

  std::vector<int> scalar_rows;
  std::vector<size_t> mats;
  std::vector<std::vector<int>> cols(nb);
  for (size_t k = 0; k < nb; ++k) {
    if (lay.side[k] == 1) {
      scalar_rows.push_back(lay.offset[k]);
      continue;
    }
    mats.push_back(k);
    for (int j = 0; j < nfree; ++j)
      if (g.block(lay.offset[k], j, lay.len(k), 1).cwiseAbs().maxCoeff() > 0.0) cols[k].push_back(j);
  }
  Eigen::MatrixXd gs(scalar_rows.size(), nfree);
  for (size_t i = 0; i < scalar_rows.size(); ++i) gs.row(i) = g.row(scalar_rows[i]);

  auto identity = [&](double theta) {
    Eigen::VectorXd v = Eigen::VectorXd::Zero(g.rows());
    for (size_t k = 0; k < nb; ++k) {
      int e = 0;
      for (int i = 0; i < lay.side[k]; ++i)
        for (int j = i; j < lay.side[k]; ++j) v(lay.offset[k] + e++) = i == j ? theta : 0.0;
    }
    return v;
  };
  const double theta = 10.0 * std::max(1.0, x0.cwiseAbs().maxCoeff());
  IpmState st;
  st.z = Eigen::VectorXd::Zero(nfree);
  st.s = identity(theta);
  st.w = identity(std::max(1.0, c.cwiseAbs().maxCoeff()) * 10.0);
  IpmState best = st;
  double best_err = std::numeric_limits<double>::infinity();

  std::vector<Eigen::MatrixXd> smat(nb), wmat(nb), sinv(nb);
  for (int it = 1; it <= max_iter; ++it) {
    for (size_t k : mats) {
      smat[k] = unpack(st.s.segment(lay.offset[k], lay.len(k)), lay.side[k]);
      wmat[k] = unpack(st.w.segment(lay.offset[k], lay.len(k)), lay.side[k]);
      sinv[k] = smat[k].llt().solve(Eigen::MatrixXd::Identity(lay.side[k], lay.side[k]));
    }
    const Eigen::VectorXd rp = x0 + g * st.z - st.s;
    const Eigen::VectorXd rd = c - g.transpose() * st.w;
    const double mu = st.s.dot(st.w) / nu;
    const double perr = rp.cwiseAbs().maxCoeff() / (1.0 + x0.cwiseAbs().maxCoeff());
    const double derr = rd.cwiseAbs().maxCoeff() / (1.0 + c.cwiseAbs().maxCoeff());
    const double err = std::max({perr, derr, mu});
    if (err < best_err) {
      best_err = err;
      best = st;
      best.iterations = it - 1;
    }
    if (log) std::cerr << "ipm " << it << " primal " << perr << " dual " << derr << " mu " << mu << "\n";
    if (err <= eps) break;

    // Schur complement H_ij = tr(G_i S⁻¹ G_j W).
    Eigen::MatrixXd h = Eigen::MatrixXd::Zero(nfree, nfree);
    if (!scalar_rows.empty()) {
      Eigen::VectorXd ratio(scalar_rows.size());
      for (size_t i = 0; i < scalar_rows.size(); ++i) ratio(i) = st.w(scalar_rows[i]) / st.s(scalar_rows[i]);
      h.noalias() += gs.transpose() * ratio.asDiagonal() * gs;
    }
    for (size_t k : mats) {
      const int s = lay.side[k];
      const auto& cs = cols[k];
      if (cs.empty()) continue;
      Eigen::MatrixXd gm(s * s, cs.size()), pm(s * s, cs.size());
      for (size_t q = 0; q < cs.size(); ++q) {
        const Eigen::MatrixXd gj = unpack(g.block(lay.offset[k], cs[q], lay.len(k), 1), s);
        const Eigen::MatrixXd pj = sinv[k] * gj * wmat[k];
        gm.col(q) = Eigen::Map<const Eigen::VectorXd>(gj.data(), s * s);
        const Eigen::MatrixXd pt = pj.transpose();
        pm.col(q) = Eigen::Map<const Eigen::VectorXd>(pt.data(), s * s);
      }
      const Eigen::MatrixXd hk = gm.transpose() * pm;
      for (size_t a = 0; a < cs.size(); ++a)
        for (size_t b = 0; b < cs.size(); ++b) h(cs[a], cs[b]) += hk(a, b);
    }
    h = 0.5 * (h + h.transpose());
    const Eigen::LDLT<Eigen::MatrixXd> ldlt(h);
    if (ldlt.info() != Eigen::Success) break;

    // Direction for centring σμ with second-order correction built from (dS_a, dW_a).
    auto direction = [&](double sm, const Eigen::VectorXd* dsa, const Eigen::VectorXd* dwa, Eigen::VectorXd& dz,
                         Eigen::VectorXd& ds, Eigen::VectorXd& dw) {
      Eigen::VectorXd t(g.rows());
      for (int row : scalar_rows) {
        double v = sm / st.s(row) - st.w(row) - rp(row) * st.w(row) / st.s(row);
        if (dsa) v -= (*dsa)(row) * (*dwa)(row) / st.s(row);
        t(row) = v;
      }
      std::vector<Eigen::MatrixXd> corr(nb);
      for (size_t k : mats) {
        const int s = lay.side[k];
        const int len = lay.len(k);
        Eigen::MatrixXd m = sm * sinv[k] - wmat[k] - sinv[k] * unpack(rp.segment(lay.offset[k], len), s) * wmat[k];
        if (dsa) {
          corr[k] = sinv[k] * unpack(dsa->segment(lay.offset[k], len), s) * unpack(dwa->segment(lay.offset[k], len), s);
          m -= corr[k];
        }
        pack(0.5 * (m + m.transpose()), t.segment(lay.offset[k], len));
      }
      const Eigen::VectorXd rhs = g.transpose() * t - rd;
      dz = ldlt.solve(rhs);
      dz += ldlt.solve(rhs - h * dz);
      ds = g * dz + rp;
      dw.resize(g.rows());
      for (int row : scalar_rows) {
        double v = sm / st.s(row) - st.w(row) - ds(row) * st.w(row) / st.s(row);
        if (dsa) v -= (*dsa)(row) * (*dwa)(row) / st.s(row);
        dw(row) = v;
      }
      for (size_t k : mats) {
        const int s = lay.side[k];
        const int len = lay.len(k);
        Eigen::MatrixXd m = sm * sinv[k] - wmat[k] - sinv[k] * unpack(ds.segment(lay.offset[k], len), s) * wmat[k];
        if (dsa) m -= corr[k];
        pack(0.5 * (m + m.transpose()), dw.segment(lay.offset[k], len));
      }
    };
    auto steps = [&](const Eigen::VectorXd& ds, const Eigen::VectorXd& dw) {
      double ap = std::numeric_limits<double>::infinity(), ad = ap;
      for (int row : scalar_rows) {
        if (ds(row) < 0.0) ap = std::min(ap, -st.s(row) / ds(row));
        if (dw(row) < 0.0) ad = std::min(ad, -st.w(row) / dw(row));
      }
      for (size_t k : mats) {
        const int len = lay.len(k);
        ap = std::min(ap, max_step(smat[k], unpack(ds.segment(lay.offset[k], len), lay.side[k])));
        ad = std::min(ad, max_step(wmat[k], unpack(dw.segment(lay.offset[k], len), lay.side[k])));
      }
      return std::make_pair(std::min(1.0, 0.98 * ap), std::min(1.0, 0.98 * ad));
    };

    Eigen::VectorXd dz, ds, dw;
    direction(0.0, nullptr, nullptr, dz, ds, dw);
    auto [ap, ad] = steps(ds, dw);
    const double mu_aff = (st.s + ap * ds).dot(st.w + ad * dw) / nu;
    const double sigma = std::clamp(std::pow(mu_aff / std::max(mu, 1e-300), 3.0), 0.0, 1.0);
    const Eigen::VectorXd dsa = ds, dwa = dw;
    direction(sigma * mu, &dsa, &dwa, dz, ds, dw);
    std::tie(ap, ad) = steps(ds, dw);
    if (std::max(ap, ad) < 1e-10) break;
    st.z += ap * dz;
    st.s += ap * ds;
    st.w += ad * dw;
    st.iterations = it;
  }
  const Eigen::VectorXd rp = x0 + g * st.z - st.s;
  const Eigen::VectorXd rd = c - g.transpose() * st.w;
  const double err = std::max({rp.cwiseAbs().maxCoeff() / (1.0 + x0.cwiseAbs().maxCoeff()),
                               rd.cwiseAbs().maxCoeff() / (1.0 + c.cwiseAbs().maxCoeff()), st.s.dot(st.w) / nu});
  return err <= best_err ? st : best;
}

}  // namespace

Polynomial Pseudoexpectation::reduce(const Polynomial& p) const { return apply_subs(p, substitution); }

void Pseudoexpectation::rebuild_index() {
  index_.clear();
  for (size_t k = 0; k < monomials.size(); ++k) index_.emplace(monomials[k], static_cast<int>(k));
}

double Pseudoexpectation::operator()(const Polynomial& p) const {
  const Polynomial q = reduce(p);
  double s = 0.0;
  for (const auto& [m, c] : q.terms()) {
    auto it = index_.find(m);
    if (it == index_.end())
      throw DomainError("pseudo-expectation: monomial of degree " + std::to_string(m.size()) +
                        " lies outside the relaxation support");
    s += c * values(it->second);
  }
  return s;
}

double pseudo_expect(const Pseudoexpectation& pe, const Polynomial& p) { return pe(p); }

SolveResult solve(const PolynomialProgram& program, const SolverConfig& cfg) {
  program.validate();
  SolveResult result;
  Pseudoexpectation& pe = result.pe;
  pe.degree = program.degree;
  pe.variables = program.variables;

  const Presolved pre = presolve(program);
  pe.substitution = pre.subs;
  if (pre.inconsistent) {
    result.status = SolveStatus::infeasible;
    result.message = "linear equalities are inconsistent";
    return result;
  }
  const Assembled as = assemble(program, pre, cfg);
  pe.bases = as.bases;

  std::set<Monomial, GradedLex> support;
  for (const auto& row : as.rows)
    for (const auto& [m, c] : row) support.insert(m);
  for (const auto& b : as.blocks)
    for (const auto& e : b.entries)
      for (const auto& [m, c] : e) support.insert(m);
  if (static_cast<int>(support.size()) > cfg.max_moments)
    throw ResourceError("relaxation needs " + std::to_string(support.size()) + " pseudo-moments, above the cap");
  pe.monomials.assign(support.begin(), support.end());
  pe.rebuild_index();
  const int n = static_cast<int>(pe.monomials.size());
  std::map<Monomial, int, GradedLex> col;
  for (int k = 0; k < n; ++k) col.emplace(pe.monomials[k], k);

  // Affine part: A y = b.
  const int p = static_cast<int>(as.rows.size());
  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(p, n);
  Eigen::VectorXd bvec(p);
  for (int i = 0; i < p; ++i) {
    for (const auto& [m, c] : as.rows[i]) a(i, col.at(m)) += c;
    bvec(i) = as.rhs[i];
  }
  Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> cod(a);
  const Eigen::VectorXd yp = cod.solve(bvec);
  if ((a * yp - bvec).cwiseAbs().maxCoeff() > 1e-8) {
    result.status = SolveStatus::infeasible;
    result.message = "equality constraints admit no pseudo-moment vector";
    return result;
  }
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(a.transpose());
  const int rank = static_cast<int>(qr.rank());
  const Eigen::MatrixXd q = qr.householderQ();
  const Eigen::MatrixXd nbasis = q.rightCols(n - rank);
  const int free = n - rank;

  // Conic part: stacked svec of all blocks equals B y.
  std::vector<int> offset;
  int rows_b = 0;
  for (const auto& b : as.blocks) {
    offset.push_back(rows_b);
    rows_b += b.side * (b.side + 1) / 2;
  }
  std::vector<Eigen::Triplet<double>> trip;
  Eigen::VectorXd cost = Eigen::VectorXd::Zero(n);
  for (size_t k = 0; k < as.blocks.size(); ++k) {
    const auto& b = as.blocks[k];
    int e = 0;
    for (int i = 0; i < b.side; ++i)
      for (int j = i; j < b.side; ++j) {
        const double w = i == j ? 1.0 : std::sqrt(2.0);
        for (const auto& [m, c] : b.entries[e]) {
          trip.emplace_back(offset[k] + e, col.at(m), w * c);
          if (b.moment && i == j) cost(col.at(m)) += cfg.trace_weight * c;
        }
        ++e;
      }
  }
  Eigen::SparseMatrix<double> bmat(rows_b, n);
  bmat.setFromTriplets(trip.begin(), trip.end());

  // Facial reduction: an equality q localized in a block's group, times any
  // monomial m with deg(mq) within the block basis, is a kernel vector of the
  // block, so the block is compressed to VᵀXV on the complement.
  std::vector<int> fr_offset, fr_side;
  std::vector<Eigen::Triplet<double>> fr_trip;
  int fr_rows = 0;
  for (size_t k = 0; k < as.blocks.size(); ++k) {
    const auto& blk = as.blocks[k];
    const int s = blk.side;
    const int len = s * (s + 1) / 2;
    Eigen::MatrixXd v = Eigen::MatrixXd::Identity(s, s);
    if (blk.group >= 0 && s > 1) {
      std::map<Monomial, int> pos;
      for (int i = 0; i < s; ++i) pos.emplace(blk.basis[i], i);
      const int bdeg = static_cast<int>(blk.basis.back().size());
      std::vector<Eigen::VectorXd> kern;
      for (const auto& q : as.home_eqs[blk.group]) {
        if (q.degree() > bdeg) continue;
        for (const auto& m : monomial_basis(as.gvars[blk.group], bdeg - q.degree())) {
          Eigen::VectorXd kv = Eigen::VectorXd::Zero(s);
          for (const auto& [t, c] : q.terms()) kv(pos.at(m * t)) += c;
          kern.push_back(kv);
        }
      }
      if (!kern.empty()) {
        Eigen::MatrixXd km(s, kern.size());
        for (size_t i = 0; i < kern.size(); ++i) km.col(i) = kern[i];
        Eigen::JacobiSVD<Eigen::MatrixXd> svd(km, Eigen::ComputeFullU);
        const auto& sv = svd.singularValues();
        int rank = 0;
        while (rank < sv.size() && sv(rank) > 1e-10 * std::max(1.0, sv(0))) ++rank;
        v = svd.matrixU().rightCols(s - rank);
      }
    }
    const int s2 = static_cast<int>(v.cols());
    if (s2 == 0) continue;
    const int len2 = s2 * (s2 + 1) / 2;
    const Eigen::SparseMatrix<double> bk = bmat.middleRows(offset[k], len);
    Eigen::VectorXd packed(len2);
    for (int c = 0; c < bk.outerSize(); ++c) {
      Eigen::VectorXd colv = Eigen::VectorXd::Zero(len);
      bool any = false;
      for (Eigen::SparseMatrix<double>::InnerIterator itc(bk, c); itc; ++itc) {
        colv(itc.row()) = itc.value();
        any = true;
      }
      if (!any) continue;
      if (s2 == s) {
        packed = colv;
      } else {
        pack(v.transpose() * unpack(colv, s) * v, packed);
      }
      for (int e = 0; e < len2; ++e)
        if (std::abs(packed(e)) > 1e-15) fr_trip.emplace_back(fr_rows + e, c, packed(e));
    }
    fr_offset.push_back(fr_rows);
    fr_side.push_back(s2);
    fr_rows += len2;
  }
  Eigen::SparseMatrix<double> cmat(fr_rows, n);
  cmat.setFromTriplets(fr_trip.begin(), fr_trip.end());

  const Eigen::MatrixXd bn = cmat * nbasis;
  const Eigen::VectorXd byp = cmat * yp;
  const Eigen::VectorXd ntc = nbasis.transpose() * cost;
  Layout lay;
  lay.offset = fr_offset;
  lay.side = fr_side;
  const size_t nblocks = lay.side.size();
  Eigen::MatrixXd kmat = bn.transpose() * bn;
  const double sigma = free > 0 ? 1e-9 * std::max(1.0, kmat.diagonal().mean()) : 0.0;
  kmat.diagonal().array() += sigma;
  const Eigen::LLT<Eigen::MatrixXd> llt(kmat);

  auto project_all = [&](const Eigen::VectorXd& in, Eigen::VectorXd& out) {
    for (size_t k = 0; k < nblocks; ++k)
      project_psd(in.segment(lay.offset[k], lay.len(k)), out.segment(lay.offset[k], lay.len(k)), lay.side[k]);
  };
  auto shift = [&](Eigen::VectorXd& v, double eps) {
    for (size_t k = 0; k < nblocks; ++k) {
      int e = 0;
      for (int i = 0; i < lay.side[k]; ++i)
        for (int j = i; j < lay.side[k]; ++j, ++e)
          if (i == j) v(lay.offset[k] + e) += eps;
    }
  };

  double rho = cfg.rho;
  Eigen::VectorXd z = Eigen::VectorXd::Zero(free);
  Eigen::VectorXd x = byp;
  Eigen::VectorXd zc(fr_rows), u = Eigen::VectorXd::Zero(fr_rows), zold(fr_rows);
  project_all(x, zc);
  if (free > 0 && cfg.ipm_iter > 0) {
    // The εI shift keeps the interior-point phase strictly feasible.
    Eigen::VectorXd shifted = byp;
    shift(shifted, cfg.ipm_shift);
    const IpmState st = interior_point(bn, shifted, ntc, lay, cfg.ipm_iter, cfg.ipm_eps, cfg.log_every > 0);
    result.ipm_iterations = st.iterations;
    z = st.z;
    x = byp + bn * z;
    Eigen::VectorXd sv = st.s;
    shift(sv, -cfg.ipm_shift);
    project_all(sv, zc);
    u = -st.w / rho;
  }
  double best_primal = std::numeric_limits<double>::infinity();
  int last_improve = 0;
  int it = 0;
  double rp = 0.0, rd = 0.0;
  result.status = SolveStatus::max_iterations;
  for (it = 1; it <= cfg.max_iter; ++it) {
    if (free > 0) {
      const Eigen::VectorXd rhs = bn.transpose() * (zc - u - byp) + sigma * z - ntc / rho;
      z = llt.solve(rhs);
      x = byp + bn * z;
    }
    zold = zc;
    const Eigen::VectorXd xh = cfg.alpha * x + (1.0 - cfg.alpha) * zold;
    project_all(xh + u, zc);
    u += xh - zc;
    rp = fr_rows > 0 ? (x - zc).cwiseAbs().maxCoeff() : 0.0;
    rd = free > 0 && fr_rows > 0 ? rho * (bn.transpose() * (zc - zold)).cwiseAbs().maxCoeff() : 0.0;
    if (cfg.log_every > 0 && it % cfg.log_every == 0)
      std::cerr << "admm " << it << " primal " << rp << " dual " << rd << " rho " << rho << "\n";
    if (std::max(rp, rd) <= cfg.tol) {
      result.status = SolveStatus::converged;
      break;
    }
    if (rp < 0.99 * best_primal) {
      best_primal = rp;
      last_improve = it;
    }
    if (rp > 10.0 * cfg.tol && it - last_improve >= cfg.stall_window) {
      result.status = SolveStatus::infeasible;
      result.message = "primal residual stalled above 10*tol";
      break;
    }
    if (it % 50 == 0) {
      if (rp > 10.0 * rd) {
        rho *= 2.0;
        u *= 0.5;
      } else if (rd > 10.0 * rp) {
        rho *= 0.5;
        u *= 2.0;
      }
    }
  }
  result.iterations = std::min(it, cfg.max_iter);
  result.primal_residual = rp;
  result.dual_residual = rd;
  pe.values = yp + nbasis * z;
  for (size_t g = 0; g < as.bases.size(); ++g) {
    const int s = as.blocks[g].side;
    pe.moment_matrices.push_back(unpack(bmat.middleRows(offset[g], s * (s + 1) / 2) * pe.values, s));
  }
  if (result.status == SolveStatus::max_iterations) result.message = "iteration limit reached";
  return result;
}

void dump_relaxation(const PolynomialProgram& program, std::ostream& os) {
  os << "# relaxation degree " << program.degree << "\n";
  os << "variables " << program.variables.size() << "\n";
  for (size_t k = 0; k < program.variables.size(); ++k) os << "  x" << k << " = " << program.variables[k] << "\n";
  std::vector<PolynomialProgram::Group> groups = program.groups;
  if (groups.empty()) {
    PolynomialProgram::Group g;
    for (int v = 0; v < static_cast<int>(program.variables.size()); ++v) g.vars.push_back(v);
    g.degree = program.degree;
    groups.push_back(g);
  }
  const Presolved pre = presolve(program);
  for (size_t g = 0; g < groups.size(); ++g) {
    std::vector<int> vs;
    for (int v : groups[g].vars) {
      auto it = pre.subs.find(v);
      if (it == pre.subs.end()) {
        vs.push_back(v);
      } else {
        const auto w = it->second.variables();
        vs.insert(vs.end(), w.begin(), w.end());
      }
    }
    std::sort(vs.begin(), vs.end());
    vs.erase(std::unique(vs.begin(), vs.end()), vs.end());
    os << "group " << g << ": " << groups[g].vars.size() << " variables (" << vs.size()
       << " after elimination), degree " << groups[g].degree << ", moment matrix side "
       << monomial_basis(vs, groups[g].degree / 2).size() << "\n";
  }
  os << "eliminated variables " << pre.subs.size() << "\n";
  for (const auto& [fam, count] : program.family_counts()) {
    os << "family " << fam << " (" << count << ")\n";
    for (const auto& c : program.equalities)
      if (c.family == fam) os << "  " << c.p.to_string(program.variables) << " = 0\n";
    for (const auto& c : program.inequalities)
      if (c.family == fam) os << "  " << c.p.to_string(program.variables) << " >= 0\n";
  }
}

}  // namespace polymom
