#include "polymom/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <mutex>
#include <string>

#include "polymom/error.hpp"

namespace polymom {

std::int64_t ipow(std::int64_t base, int exp) {
  std::int64_t out = 1;
  for (int k = 0; k < exp; ++k) out *= base;
  return out;
}

std::int64_t binomial(int n, int k) {
  if (k < 0 || k > n) return 0;
  k = std::min(k, n - k);
  std::int64_t out = 1;
  for (int i = 1; i <= k; ++i) out = out * (n - k + i) / i;
  return out;
}

double factorial(int n) {
  double out = 1.0;
  for (int i = 2; i <= n; ++i) out *= i;
  return out;
}

double double_factorial_odd(int k) {
  double out = 1.0;
  for (int i = 2 * k - 1; i > 1; i -= 2) out *= i;
  return out;
}

std::int64_t multiplicity(const Index& i, int r) {
  std::vector<int> counts(r, 0);
  for (int v : i) {
    if (v < 0 || v >= r) throw DomainError("multi-index entry " + std::to_string(v) + " outside [0, r)");
    ++counts[v];
  }
  double m = factorial(static_cast<int>(i.size()));
  for (int c : counts) m /= factorial(c);
  return static_cast<std::int64_t>(std::llround(m));
}

std::int64_t dense_offset(const Index& i, int r) {
  std::int64_t off = 0;
  for (int v : i) off = off * r + v;
  return off;
}

int IndexTable::position(const Index& i) const {
  return dense_to_sorted[dense_offset(i, r)];
}

namespace {

void enumerate_sorted(int r, int order, int start, Index& cur, std::vector<Index>& out) {
  if (static_cast<int>(cur.size()) == order) {
    out.push_back(cur);
    return;
  }
  for (int v = start; v < r; ++v) {
    cur.push_back(v);
    enumerate_sorted(r, order, v, cur, out);
    cur.pop_back();
  }
}

std::shared_ptr<const IndexTable> build_table(int r, int order) {
  if (r < 1 || order < 0) throw DomainError("index table needs r >= 1 and order >= 0");
  const std::int64_t n = ipow(r, order);
  if (n > 1000000) throw ResourceError("dense index space r^order exceeds 1e6");
  auto t = std::make_shared<IndexTable>();
  t->r = r;
  t->order = order;
  Index cur;
  enumerate_sorted(r, order, 0, cur, t->sorted);
  t->mult.reserve(t->sorted.size());
  t->sorted_to_dense.reserve(t->sorted.size());
  std::map<Index, int> pos;
  for (int k = 0; k < t->size(); ++k) {
    t->mult.push_back(multiplicity(t->sorted[k], r));
    t->sorted_to_dense.push_back(dense_offset(t->sorted[k], r));
    pos.emplace(t->sorted[k], k);
  }
  t->dense_to_sorted.resize(n);
  Index idx(order, 0);
  for (std::int64_t off = 0; off < n; ++off) {
    std::int64_t rem = off;
    for (int k = order - 1; k >= 0; --k) {
      idx[k] = static_cast<int>(rem % r);
      rem /= r;
    }
    Index s = idx;
    std::sort(s.begin(), s.end());
    t->dense_to_sorted[off] = pos.at(s);
  }
  return t;
}

}  // namespace

std::shared_ptr<const IndexTable> index_table(int r, int order) {
  static std::mutex mu;
  static std::map<std::pair<int, int>, std::shared_ptr<const IndexTable>> cache;
  std::lock_guard<std::mutex> lock(mu);
  auto key = std::make_pair(r, order);
  auto it = cache.find(key);
  if (it != cache.end()) return it->second;
  auto t = build_table(r, order);
  cache.emplace(key, t);
  return t;
}

DenseTensor::DenseTensor(int order, int dim)
    : order_(order), dim_(dim), values_(Eigen::VectorXd::Zero(ipow(dim, order))) {}

DenseTensor::DenseTensor(int order, int dim, Eigen::VectorXd values)
    : order_(order), dim_(dim), values_(std::move(values)) {
  if (values_.size() != ipow(dim, order)) throw DomainError("dense tensor length must be r^order");
}

SymTensor::SymTensor(int order, int dim)
    : order_(order), dim_(dim), table_(index_table(dim, order)), values_(Eigen::VectorXd::Zero(table_->size())) {}

SymTensor::SymTensor(int order, int dim, Eigen::VectorXd sorted_values)
    : order_(order), dim_(dim), table_(index_table(dim, order)), values_(std::move(sorted_values)) {
  if (values_.size() != table_->size()) throw DomainError("symmetric tensor needs C(r+order-1, order) values");
}

SymTensor SymTensor::symmetrize(const DenseTensor& t) {
  SymTensor out(t.order(), t.dim());
  const auto& tab = out.table();
  for (std::int64_t off = 0; off < tab.dense_size(); ++off) out.values_(tab.dense_to_sorted[off]) += t.values()(off);
  for (int k = 0; k < tab.size(); ++k) out.values_(k) /= static_cast<double>(tab.mult[k]);
  return out;
}

double SymTensor::operator()(const Index& i) const {
  for (int v : i)
    if (v < 0 || v >= dim_) throw DomainError("multi-index entry outside [0, r)");
  return values_(table_->position(i));
}

DenseTensor SymTensor::to_dense() const {
  DenseTensor out(order_, dim_);
  for (std::int64_t off = 0; off < table_->dense_size(); ++off) out.values()(off) = values_(table_->dense_to_sorted[off]);
  return out;
}

double SymTensor::norm() const {
  double s = 0.0;
  for (int k = 0; k < table_->size(); ++k) s += static_cast<double>(table_->mult[k]) * values_(k) * values_(k);
  return std::sqrt(s);
}

double frobenius(const DenseTensor& a, const DenseTensor& b) {
  if (a.order() != b.order() || a.dim() != b.dim()) throw DomainError("frobenius: shape mismatch");
  return a.values().dot(b.values());
}

Eigen::VectorXd vec(const Eigen::MatrixXd& m) {
  Eigen::VectorXd v(m.size());
  for (int i = 0; i < m.rows(); ++i)
    for (int j = 0; j < m.cols(); ++j) v(i * m.cols() + j) = m(i, j);
  return v;
}

Eigen::VectorXd vec(const DenseTensor& t) { return t.values(); }

Eigen::MatrixXd mat(const Eigen::VectorXd& v) {
  const auto r = static_cast<int>(std::llround(std::sqrt(static_cast<double>(v.size()))));
  if (static_cast<Eigen::Index>(r) * r != v.size()) throw DomainError("mat: length is not a perfect square");
  Eigen::MatrixXd m(r, r);
  for (int i = 0; i < r; ++i)
    for (int j = 0; j < r; ++j) m(i, j) = v(i * r + j);
  return m;
}

DenseTensor ten(const Eigen::VectorXd& v, int dim, int order) {
  if (v.size() != ipow(dim, order)) throw DomainError("ten: length is not r^order");
  return DenseTensor(order, dim, v);
}

Eigen::MatrixXd to_matrix(const DenseTensor& t) {
  if (t.order() != 2) throw DomainError("to_matrix needs an order-2 tensor");
  return mat(t.values());
}

DenseTensor from_matrix(const Eigen::MatrixXd& m) {
  if (m.rows() != m.cols()) throw DomainError("from_matrix needs a square matrix");
  return DenseTensor(2, static_cast<int>(m.rows()), vec(m));
}

Eigen::MatrixXd kron_power(const Eigen::MatrixXd& v, int order) {
  Eigen::MatrixXd out = Eigen::MatrixXd::Ones(1, 1);
  for (int k = 0; k < order; ++k) {
    Eigen::MatrixXd next(out.rows() * v.rows(), out.cols() * v.cols());
    for (int i = 0; i < out.rows(); ++i)
      for (int j = 0; j < out.cols(); ++j)
        next.block(i * v.rows(), j * v.cols(), v.rows(), v.cols()) = out(i, j) * v;
    out = std::move(next);
  }
  return out;
}

DenseTensor apply_transform(const Eigen::MatrixXd& u, const DenseTensor& t) {
  const auto n = t.values().size();
  if (u.rows() != n || u.cols() != n) throw DomainError("apply_transform: U must be r^order square");
  return DenseTensor(t.order(), t.dim(), u * t.values());
}

DenseTensor rotate_tensor(const Eigen::MatrixXd& v, const DenseTensor& t) {
  const int r = t.dim();
  if (v.rows() != r || v.cols() != r) throw DomainError("rotate_tensor: rotation dimension mismatch");
  Eigen::VectorXd cur = t.values();
  Eigen::VectorXd next(cur.size());
  for (int mode = 0; mode < t.order(); ++mode) {
    const std::int64_t right = ipow(r, t.order() - mode - 1);
    const std::int64_t left = ipow(r, mode);
    for (std::int64_t l = 0; l < left; ++l) {
      for (std::int64_t q = 0; q < right; ++q) {
        const std::int64_t base = l * r * right + q;
        for (int i = 0; i < r; ++i) {
          double s = 0.0;
          for (int j = 0; j < r; ++j) s += v(i, j) * cur(base + j * right);
          next(base + i * right) = s;
        }
      }
    }
    cur.swap(next);
  }
  return DenseTensor(t.order(), r, std::move(cur));
}

DenseTensor outer_power(const Eigen::VectorXd& v, int order) {
  Eigen::VectorXd out = Eigen::VectorXd::Ones(1);
  for (int k = 0; k < order; ++k) {
    Eigen::VectorXd next(out.size() * v.size());
    for (Eigen::Index i = 0; i < out.size(); ++i) next.segment(i * v.size(), v.size()) = out(i) * v;
    out = std::move(next);
  }
  return DenseTensor(order, static_cast<int>(v.size()), std::move(out));
}

GaugeRotation::GaugeRotation(Eigen::MatrixXd v, double tol) : v_(std::move(v)) {
  if (v_.rows() != v_.cols()) throw DomainError("gauge rotation must be square");
  const double err = (v_.transpose() * v_ - Eigen::MatrixXd::Identity(v_.rows(), v_.cols())).cwiseAbs().maxCoeff();
  if (err > tol) throw DomainError("gauge rotation is not orthogonal");
}

GaugeRotation GaugeRotation::identity(int r) { return GaugeRotation(Eigen::MatrixXd::Identity(r, r)); }

}  // namespace polymom
