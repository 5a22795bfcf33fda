#include "polymom/moments.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "polymom/error.hpp"
#include "polymom/rng.hpp"

namespace polymom {

namespace {

constexpr std::int64_t kChunk = 4096;

// Column means accumulated chunk by chunk in a fixed order.
Eigen::VectorXd chunked_mean(const Eigen::MatrixXd& z) {
  const std::int64_t n = z.rows();
  Eigen::VectorXd total = Eigen::VectorXd::Zero(z.cols());
  for (std::int64_t s = 0; s < n; s += kChunk) {
    const std::int64_t len = std::min(kChunk, n - s);
    total += z.middleRows(s, len).colwise().sum().transpose();
  }
  return total / static_cast<double>(n);
}

Eigen::MatrixXd chunked_gram(const Eigen::MatrixXd& z) {
  const std::int64_t n = z.rows();
  Eigen::MatrixXd total = Eigen::MatrixXd::Zero(z.cols(), z.cols());
  for (std::int64_t s = 0; s < n; s += kChunk) {
    const std::int64_t len = std::min(kChunk, n - s);
    const auto block = z.middleRows(s, len);
    total.noalias() += block.transpose() * block;
  }
  total /= static_cast<double>(n);
  return 0.5 * (total + total.transpose());
}

std::int64_t saturate(double x) {
  if (!(x < 9.0e18)) return std::numeric_limits<std::int64_t>::max();
  return static_cast<std::int64_t>(std::ceil(x));
}

}  // namespace

void Cube::set_sym(int a, int b, int c, double x) {
  (*this)(a, b, c) = x;
  (*this)(a, c, b) = x;
  (*this)(b, a, c) = x;
  (*this)(b, c, a) = x;
  (*this)(c, a, b) = x;
  (*this)(c, b, a) = x;
}

void QuadraticMomentTable::validate() const {
  const int n = d();
  if (S.cols() != n || mu.size() != n || T.dim() != n) throw DomainError("moment table: inconsistent dimensions");
  if (eta < 0.0) throw DomainError("moment table: eta must be nonnegative");
  if ((S - S.transpose()).cwiseAbs().maxCoeff() > 1e-12) throw DomainError("moment table: S must be symmetric");
  for (int a = 0; a < n; ++a)
    for (int b = 0; b < n; ++b)
      for (int c = 0; c < n; ++c) {
        const double x = T(a, b, c);
        if (std::abs(x - T(b, a, c)) > 1e-12 || std::abs(x - T(a, c, b)) > 1e-12)
          throw DomainError("moment table: T must be symmetric");
      }
}

void PairMomentTable::validate() const {
  if (S.rows() != S.cols()) throw DomainError("pair table: S must be square");
  if (eta < 0.0) throw DomainError("pair table: eta must be nonnegative");
  if ((S - S.transpose()).cwiseAbs().maxCoeff() > 1e-12) throw DomainError("pair table: S must be symmetric");
}

QuadraticMomentTable exact_quadratic_moments(const PolyNetwork& net) {
  if (net.kind != NetworkKind::quadratic) throw DomainError("exact_quadratic_moments needs a quadratic network");
  const int d = net.d;
  QuadraticMomentTable m;
  m.mu.resize(d);
  m.S.resize(d, d);
  m.T = Cube(d);
  for (int a = 0; a < d; ++a) {
    m.mu(a) = net.Q[a].trace();
    for (int b = a; b < d; ++b) {
      const Eigen::MatrixXd ab = net.Q[a] * net.Q[b];
      m.S(a, b) = m.S(b, a) = ab.trace();
      for (int c = b; c < d; ++c) m.T.set_sym(a, b, c, (ab * net.Q[c]).trace());
    }
  }
  return m;
}

QuadraticMomentTable estimate_quadratic_moments(const Eigen::MatrixXd& samples, double eta, double delta) {
  if (samples.rows() == 0) throw DomainError("estimator needs at least one sample");
  if (eta < 0.0 || !(delta > 0.0)) throw DomainError("estimator needs eta >= 0 and delta > 0");
  const std::int64_t n = samples.rows();
  const int d = static_cast<int>(samples.cols());
  QuadraticMomentTable m;
  m.mu = chunked_mean(samples);
  const Eigen::MatrixXd zc = samples.rowwise() - m.mu.transpose();
  m.S = 0.5 * chunked_gram(zc);
  m.T = Cube(d);
  for (int a = 0; a < d; ++a)
    for (int b = a; b < d; ++b)
      for (int c = b; c < d; ++c) {
        double total = 0.0;
        for (std::int64_t s = 0; s < n; s += kChunk) {
          const std::int64_t len = std::min(kChunk, n - s);
          total += (zc.col(a).segment(s, len).array() * zc.col(b).segment(s, len).array() *
                    zc.col(c).segment(s, len).array())
                       .sum();
        }
        m.T.set_sym(a, b, c, total / (8.0 * static_cast<double>(n)));
      }
  m.eta = eta;
  return m;
}

PairMomentTable estimate_pair_moments(const Eigen::MatrixXd& samples, double eta, double delta) {
  if (samples.rows() == 0) throw DomainError("estimator needs at least one sample");
  if (eta < 0.0 || !(delta > 0.0)) throw DomainError("estimator needs eta >= 0 and delta > 0");
  PairMomentTable m;
  m.S = chunked_gram(samples);
  m.eta = eta;
  return m;
}

std::int64_t quadratic_sample_size(int r, double radius, int d, double eta, double delta) {
  if (!(eta > 0.0) || !(delta > 0.0)) throw DomainError("sample size needs eta, delta > 0");
  const double lg = std::log(2.0 * d / delta);
  return saturate(std::pow(r, 3) * std::pow(radius, 6) * lg * lg * lg / (eta * eta));
}

std::int64_t pair_sample_size(int r, int omega, double radius, int d, double eta, double delta) {
  if (!(eta > 0.0) || !(delta > 0.0)) throw DomainError("sample size needs eta, delta > 0");
  const double lg = std::max(std::log(d / delta), 1.0);
  return saturate(std::pow(omega * r, 2.0 * omega) * std::pow(radius, 4) * std::pow(lg, 2.0 * omega) / (eta * eta));
}

QuadraticMomentTable perturb(const QuadraticMomentTable& m, double eta, std::uint64_t rng_seed) {
  QuadraticMomentTable out = m;
  const int d = m.d();
  Stream rng(rng_seed, 0x7e);
  auto noise = [&] { return eta * (2.0 * rng.uniform() - 1.0); };
  for (int a = 0; a < d; ++a)
    for (int b = a; b < d; ++b) {
      out.S(a, b) += noise();
      out.S(b, a) = out.S(a, b);
    }
  for (int a = 0; a < d; ++a)
    for (int b = a; b < d; ++b)
      for (int c = b; c < d; ++c) out.T.set_sym(a, b, c, m.T(a, b, c) + noise());
  out.eta = m.eta + eta;
  return out;
}

PairMomentTable perturb(const PairMomentTable& m, double eta, std::uint64_t rng_seed) {
  PairMomentTable out = m;
  const int d = m.d();
  Stream rng(rng_seed, 0x7f);
  for (int a = 0; a < d; ++a)
    for (int b = a; b < d; ++b) {
      out.S(a, b) += eta * (2.0 * rng.uniform() - 1.0);
      out.S(b, a) = out.S(a, b);
    }
  out.eta = m.eta + eta;
  return out;
}

double gaussian_monomial_moment(const std::vector<int>& counts) {
  double out = 1.0;
  for (int c : counts) {
    if (c % 2 != 0) return 0.0;
    out *= double_factorial_odd(c / 2);
  }
  return out;
}

Eigen::MatrixXd SigmaMatrix::weighted() const { return mult.asDiagonal() * sym * mult.asDiagonal(); }

double SigmaMatrix::lambda_max_full() const {
  const Eigen::VectorXd h = mult.cwiseSqrt();
  const Eigen::MatrixXd w = h.asDiagonal() * sym * h.asDiagonal();
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(0.5 * (w + w.transpose()), Eigen::EigenvaluesOnly);
  return es.eigenvalues().maxCoeff();
}

namespace {

void fill_dense(SigmaMatrix& s, const IndexTable& tab) {
  if (tab.dense_size() > SigmaMatrix::kDenseLimit) return;
  const auto n = tab.dense_size();
  s.dense.resize(n, n);
  for (std::int64_t i = 0; i < n; ++i)
    for (std::int64_t j = 0; j < n; ++j) s.dense(i, j) = s.sym(tab.dense_to_sorted[i], tab.dense_to_sorted[j]);
}

}  // namespace

SigmaMatrix sigma_matrix(int r, int omega, const SeedDistribution& seed) {
  if (r < 1 || omega < 1) throw DomainError("sigma_matrix needs r, omega >= 1");
  if (ipow(r, omega) > 1000000) throw ResourceError("sigma_matrix: r^omega exceeds 1e6");
  const auto tab = index_table(r, omega);
  const double scale = rotation_invariant_scale(seed, r, 2 * omega);
  SigmaMatrix s;
  s.r = r;
  s.order = omega;
  const int m = tab->size();
  s.sym.resize(m, m);
  s.mult.resize(m);
  std::vector<int> counts(r);
  for (int i = 0; i < m; ++i) {
    s.mult(i) = static_cast<double>(tab->mult[i]);
    for (int j = i; j < m; ++j) {
      std::fill(counts.begin(), counts.end(), 0);
      for (int k : tab->sorted[i]) ++counts[k];
      for (int k : tab->sorted[j]) ++counts[k];
      s.sym(i, j) = s.sym(j, i) = scale * gaussian_monomial_moment(counts);
    }
  }
  fill_dense(s, *tab);
  return s;
}

SigmaMatrix identity_sigma(int r, int omega) {
  if (ipow(r, omega) > 1000000) throw ResourceError("identity_sigma: r^omega exceeds 1e6");
  const auto tab = index_table(r, omega);
  SigmaMatrix s;
  s.r = r;
  s.order = omega;
  const int m = tab->size();
  s.mult.resize(m);
  s.sym = Eigen::MatrixXd::Zero(m, m);
  for (int i = 0; i < m; ++i) {
    s.mult(i) = static_cast<double>(tab->mult[i]);
    s.sym(i, i) = 1.0 / s.mult(i);
  }
  fill_dense(s, *tab);
  return s;
}

double sigma_inner(const SymTensor& a, const SymTensor& b, const SigmaMatrix& sigma) {
  if (a.dim() != sigma.r || b.dim() != sigma.r || a.order() != sigma.order || b.order() != sigma.order)
    throw DomainError("sigma_inner: shape mismatch");
  const Eigen::VectorXd da = sigma.mult.cwiseProduct(a.values());
  const Eigen::VectorXd db = sigma.mult.cwiseProduct(b.values());
  return da.dot(sigma.sym * db);
}

double sigma_inner(const DenseTensor& a, const DenseTensor& b, const SigmaMatrix& sigma) {
  if (a.dim() != sigma.r || b.dim() != sigma.r || a.order() != sigma.order || b.order() != sigma.order)
    throw DomainError("sigma_inner: shape mismatch");
  if (sigma.has_dense()) return a.values().dot(sigma.dense * b.values());
  // Σ depends only on sorted indices, so summing each orbit first is exact.
  const auto& tab = *index_table(sigma.r, sigma.order);
  Eigen::VectorXd sa = Eigen::VectorXd::Zero(tab.size()), sb = Eigen::VectorXd::Zero(tab.size());
  for (std::int64_t off = 0; off < tab.dense_size(); ++off) {
    sa(tab.dense_to_sorted[off]) += a.values()(off);
    sb(tab.dense_to_sorted[off]) += b.values()(off);
  }
  return sa.dot(sigma.sym * sb);
}

double hermite_pair_moment(const Eigen::VectorXd& v, const Eigen::VectorXd& w, int omega) {
  if (v.size() != w.size()) throw DomainError("hermite_pair_moment: length mismatch");
  const double vw = v.dot(w);
  const double vv = v.squaredNorm();
  const double ww = w.squaredNorm();
  double total = 0.0;
  for (int m = 0; 2 * m <= omega; ++m) {
    const double multinom = factorial(omega) / (factorial(m) * factorial(m) * factorial(omega - 2 * m));
    total += multinom * std::pow(0.25, m) * std::pow(vw, omega - 2 * m) * std::pow(vv * ww, m);
  }
  return factorial(omega) * total;
}

PairMomentTable exact_pair_moments(const PolyNetwork& net, SigmaMode mode, const SeedDistribution& seed) {
  net.validate();
  PairMomentTable out;
  out.S.resize(net.d, net.d);
  if (net.kind == NetworkKind::lowrank) {
    const double scale = mode == SigmaMode::gaussian ? rotation_invariant_scale(seed, net.r, 2 * net.omega) : 1.0;
    for (int a = 0; a < net.d; ++a)
      for (int b = a; b < net.d; ++b) {
        double s = 0.0;
        for (const auto& v : net.components[a])
          for (const auto& w : net.components[b])
            s += mode == SigmaMode::gaussian ? hermite_pair_moment(v, w, net.omega) : std::pow(v.dot(w), net.omega);
        out.S(a, b) = out.S(b, a) = scale * s;
      }
    return out;
  }
  const SigmaMatrix sigma = mode == SigmaMode::gaussian ? sigma_matrix(net.r, net.omega, seed) : identity_sigma(net.r, net.omega);
  std::vector<SymTensor> t;
  for (int a = 0; a < net.d; ++a) t.push_back(net.unit_sym(a));
  for (int a = 0; a < net.d; ++a)
    for (int b = a; b < net.d; ++b) out.S(a, b) = out.S(b, a) = sigma_inner(t[a], t[b], sigma);
  return out;
}

double rotation_invariant_scale(const SeedDistribution& seed, int r, int e) {
  if (seed.kind == SeedDistribution::Kind::gaussian) return 1.0;
  if (!seed.radial_moment) throw ConfigurationError("rotation-invariant seed needs a radial moment oracle");
  if (e % 2 != 0) return 0.0;
  return seed.radial_moment(e) / gaussian_norm_moment(r, e);
}

double cumulant_diagonal(const std::vector<Eigen::VectorXd>& v, const std::vector<int>& beta) {
  int order = 0;
  for (int b : beta) {
    if (b < 0) throw DomainError("cumulant_diagonal: negative multi-index entry");
    order += b;
  }
  if (order < 1) throw DomainError("cumulant_diagonal needs |beta| >= 1");
  double s = 0.0;
  for (const auto& vi : v) {
    if (vi.size() != static_cast<Eigen::Index>(beta.size())) throw DomainError("cumulant_diagonal: length mismatch");
    double p = 1.0;
    for (size_t a = 0; a < beta.size(); ++a) p *= std::pow(vi(static_cast<Eigen::Index>(a)), beta[a]);
    s += p;
  }
  return factorial(order - 1) * std::pow(2.0, order - 1) * s;
}

}  // namespace polymom
