#pragma once

#include <cstdint>
#include <memory>
#include <vector>

#include <Eigen/Dense>

namespace polymom {

/// Multi-index into [r]^ω, zero-based.
using Index = std::vector<int>;

std::int64_t ipow(std::int64_t base, int exp);
std::int64_t binomial(int n, int k);
double factorial(int n);
/// (2k-1)!! with (-1)!! = 1.
double double_factorial_odd(int k);

/// Number of tuples j with sort(j) = sort(i), i.e. ω! / Π(repetition counts)!.
std::int64_t multiplicity(const Index& i, int r);

/// Row-major offset of i in a dense [r]^ω array.
std::int64_t dense_offset(const Index& i, int r);

/**
 * Shared enumeration of sorted multi-indices for a given (r, ω): the sorted
 * list in lexicographic order, their multiplicities, and the map from dense
 * offsets to sorted positions.
 */
struct IndexTable {
  int r = 0;
  int order = 0;
  std::vector<Index> sorted;
  std::vector<std::int64_t> mult;
  std::vector<int> dense_to_sorted;
  std::vector<std::int64_t> sorted_to_dense;

  int size() const { return static_cast<int>(sorted.size()); }
  std::int64_t dense_size() const { return static_cast<std::int64_t>(dense_to_sorted.size()); }
  int position(const Index& i) const;
};

std::shared_ptr<const IndexTable> index_table(int r, int order);

class DenseTensor {
 public:
  DenseTensor() = default;
  DenseTensor(int order, int dim);
  DenseTensor(int order, int dim, Eigen::VectorXd values);

  int order() const { return order_; }
  int dim() const { return dim_; }
  const Eigen::VectorXd& values() const { return values_; }
  Eigen::VectorXd& values() { return values_; }

  double operator()(const Index& i) const { return values_(dense_offset(i, dim_)); }
  double& operator()(const Index& i) { return values_(dense_offset(i, dim_)); }

  double norm() const { return values_.norm(); }

 private:
  int order_ = 0;
  int dim_ = 0;
  Eigen::VectorXd values_;
};

class SymTensor {
 public:
  SymTensor() = default;
  SymTensor(int order, int dim);
  SymTensor(int order, int dim, Eigen::VectorXd sorted_values);

  /// Averages each permutation orbit of a dense tensor.
  static SymTensor symmetrize(const DenseTensor& t);

  int order() const { return order_; }
  int dim() const { return dim_; }
  const IndexTable& table() const { return *table_; }
  const Eigen::VectorXd& values() const { return values_; }
  Eigen::VectorXd& values() { return values_; }

  /// Lookup at sort(i).
  double operator()(const Index& i) const;

  DenseTensor to_dense() const;
  double norm() const;

 private:
  int order_ = 0;
  int dim_ = 0;
  std::shared_ptr<const IndexTable> table_;
  Eigen::VectorXd values_;
};

/// Frobenius inner product.
double frobenius(const DenseTensor& a, const DenseTensor& b);

Eigen::VectorXd vec(const Eigen::MatrixXd& m);
Eigen::VectorXd vec(const DenseTensor& t);
Eigen::MatrixXd mat(const Eigen::VectorXd& v);
DenseTensor ten(const Eigen::VectorXd& v, int dim, int order);
Eigen::MatrixXd to_matrix(const DenseTensor& t);
DenseTensor from_matrix(const Eigen::MatrixXd& m);

/// V ⊗ V ⊗ ... ⊗ V (ω factors).
Eigen::MatrixXd kron_power(const Eigen::MatrixXd& v, int order);

/// ten(U · vec(T)).
DenseTensor apply_transform(const Eigen::MatrixXd& u, const DenseTensor& t);

/// F_{V^⊗ω}(T) computed by mode products, without forming the Kronecker power.
DenseTensor rotate_tensor(const Eigen::MatrixXd& v, const DenseTensor& t);

DenseTensor outer_power(const Eigen::VectorXd& v, int order);

class GaugeRotation {
 public:
  GaugeRotation() = default;
  explicit GaugeRotation(Eigen::MatrixXd v, double tol = 1e-10);
  static GaugeRotation identity(int r);

  const Eigen::MatrixXd& matrix() const { return v_; }
  int dim() const { return static_cast<int>(v_.rows()); }

 private:
  Eigen::MatrixXd v_;
};

}  // namespace polymom
