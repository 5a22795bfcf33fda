#pragma once

#include <cstdint>
#include <vector>

#include <Eigen/Dense>

#include "polymom/model.hpp"
#include "polymom/network.hpp"
#include "polymom/tensor.hpp"

namespace polymom {

/// Symmetric d×d×d array stored densely, T(a,b,c) at (a*d + b)*d + c.
class Cube {
 public:
  Cube() = default;
  explicit Cube(int d) : d_(d), v_(Eigen::VectorXd::Zero(static_cast<Eigen::Index>(d) * d * d)) {}
  int dim() const { return d_; }
  double operator()(int a, int b, int c) const { return v_((static_cast<Eigen::Index>(a) * d_ + b) * d_ + c); }
  double& operator()(int a, int b, int c) { return v_((static_cast<Eigen::Index>(a) * d_ + b) * d_ + c); }
  /// Writes x to all six permutations of (a,b,c).
  void set_sym(int a, int b, int c, double x);
  const Eigen::VectorXd& flat() const { return v_; }

 private:
  int d_ = 0;
  Eigen::VectorXd v_;
};

struct QuadraticMomentTable {
  Eigen::VectorXd mu;
  Eigen::MatrixXd S;
  Cube T;
  double eta = 0.0;

  int d() const { return static_cast<int>(S.rows()); }
  void validate() const;
};

struct PairMomentTable {
  Eigen::MatrixXd S;
  double eta = 0.0;

  int d() const { return static_cast<int>(S.rows()); }
  void validate() const;
};

QuadraticMomentTable exact_quadratic_moments(const PolyNetwork& net);

/// Two-pass centred estimator: Ŝ = ½·mean(z̃_a z̃_b), T̂ = ⅛·mean(z̃_a z̃_b z̃_c).
QuadraticMomentTable estimate_quadratic_moments(const Eigen::MatrixXd& samples, double eta, double delta);

/// Ŝ_ab = mean(z_a z_b).
PairMomentTable estimate_pair_moments(const Eigen::MatrixXd& samples, double eta, double delta);

/// Sample size r³R⁶log³(2d/δ)/η² for the quadratic estimator.
std::int64_t quadratic_sample_size(int r, double radius, int d, double eta, double delta);
/// Sample size (ωr)^{2ω} R⁴ log^{2ω}(d/δ)/η² for the pair estimator.
std::int64_t pair_sample_size(int r, int omega, double radius, int d, double eta, double delta);

/// Adds independent uniform [−η, η] noise, preserving symmetry, and records η.
QuadraticMomentTable perturb(const QuadraticMomentTable& m, double eta, std::uint64_t rng_seed);
PairMomentTable perturb(const PairMomentTable& m, double eta, std::uint64_t rng_seed);

enum class SigmaMode { gaussian, identity };

/**
 * Σ = E[g^⊗ω (g^⊗ω)ᵀ] in compact form. Σ is ultra-symmetric, so its
 * symmetrization Σ_sym is the restriction to sorted indices and
 * ⟨T, T'⟩_Σ = tᵀ D Σ_sym D t' on sorted entries.
 */
struct SigmaMatrix {
  int r = 0;
  int order = 0;
  Eigen::MatrixXd sym;        ///< m×m
  Eigen::VectorXd mult;       ///< diagonal of D
  Eigen::MatrixXd dense;      ///< r^ω×r^ω, present only when r^ω <= kDenseLimit

  static constexpr std::int64_t kDenseLimit = 4096;

  int m() const { return static_cast<int>(sym.rows()); }
  bool has_dense() const { return dense.size() > 0; }
  /// D Σ_sym D, the Gram matrix of ⟨·,·⟩_Σ on sorted coordinates.
  Eigen::MatrixXd weighted() const;
  /// Spectrum of the full Σ restricted to its range (equals that of D^{1/2} Σ_sym D^{1/2}).
  double lambda_max_full() const;
};

/// E[Π_k g_k^{c_k}] for g ~ N(0, Id): Π (c_k − 1)!! if every c_k is even, else 0.
double gaussian_monomial_moment(const std::vector<int>& counts);

SigmaMatrix sigma_matrix(int r, int omega, const SeedDistribution& seed = SeedDistribution::gaussian());
/// Σ_{ij} = 1/|i| · 1[sort i = sort j]: ⟨·,·⟩_Σ becomes the Frobenius product.
SigmaMatrix identity_sigma(int r, int omega);

double sigma_inner(const DenseTensor& a, const DenseTensor& b, const SigmaMatrix& sigma);
double sigma_inner(const SymTensor& a, const SymTensor& b, const SigmaMatrix& sigma);

/// E⟨v,g⟩^ω⟨w,g⟩^ω = ω! Σ_m C(ω; m, m, ω−2m) 4^{−m} ⟨v,w⟩^{ω−2m} ‖v‖^{2m} ‖w‖^{2m}.
double hermite_pair_moment(const Eigen::VectorXd& v, const Eigen::VectorXd& w, int omega);

/// Exact pair moments of a network: S_ab = ⟨T_a, T_b⟩_Σ.
PairMomentTable exact_pair_moments(const PolyNetwork& net, SigmaMode mode = SigmaMode::gaussian,
                                   const SeedDistribution& seed = SeedDistribution::gaussian());

/// C_{D,e} = E_D‖x‖^e / E_{χ²(r)}[ν^{e/2}]; 1 for the Gaussian, 0 for odd e otherwise.
double rotation_invariant_scale(const SeedDistribution& seed, int r, int e);

/**
 * Joint cumulant κ_β(z_1..z_d) of a diagonal quadratic network whose i-th
 * diagonal entries across units form v_i ∈ R^d:
 * (|β|−1)! 2^{|β|−1} Σ_i Π_a (v_i)_a^{β_a}.
 */
double cumulant_diagonal(const std::vector<Eigen::VectorXd>& v, const std::vector<int>& beta);

}  // namespace polymom
