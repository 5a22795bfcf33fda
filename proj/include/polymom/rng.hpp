#pragma once

#include <cstdint>
#include <limits>
#include <random>

#include <Eigen/Dense>

namespace polymom {

/// SplitMix64 finalizer.
constexpr std::uint64_t mix64(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

/**
 * Counter-based random stream. The state is a hash of (seed, unit, index), so
 * any sample or parameter block can be regenerated independently of the
 * others. Satisfies UniformRandomBitGenerator.
 */
class Stream {
 public:
  using result_type = std::uint64_t;

  explicit Stream(std::uint64_t seed, std::uint64_t unit = 0, std::uint64_t index = 0)
      : state_(mix64(mix64(mix64(seed) ^ (unit * 0xd1b54a32d192ed03ULL)) ^
                     (index * 0x8cb92ba72f3d8dd7ULL))) {}

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

  result_type operator()() {
    state_ += 0x9e3779b97f4a7c15ULL;
    std::uint64_t z = state_;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  double normal() { return normal_(*this); }
  double uniform() { return std::uniform_real_distribution<double>(0.0, 1.0)(*this); }

  Eigen::VectorXd normal_vector(int n) {
    Eigen::VectorXd v(n);
    for (int i = 0; i < n; ++i) v(i) = normal();
    return v;
  }

  Eigen::MatrixXd normal_matrix(int rows, int cols) {
    Eigen::MatrixXd m(rows, cols);
    for (int i = 0; i < rows; ++i)
      for (int j = 0; j < cols; ++j) m(i, j) = normal();
    return m;
  }

 private:
  std::uint64_t state_;
  std::normal_distribution<double> normal_;
};

/// Haar-distributed element of O(r).
inline Eigen::MatrixXd random_orthogonal(int r, Stream& rng) {
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(rng.normal_matrix(r, r));
  Eigen::MatrixXd q = qr.householderQ();
  Eigen::MatrixXd rr = qr.matrixQR();
  for (int j = 0; j < r; ++j)
    if (rr(j, j) < 0) q.col(j) *= -1.0;
  return q;
}

}  // namespace polymom
