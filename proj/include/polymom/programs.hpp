#pragma once

#include <optional>
#include <vector>

#include <Eigen/Dense>

#include "polymom/moments.hpp"
#include "polymom/network.hpp"
#include "polymom/relaxation.hpp"

namespace polymom {

/// Non-degenerate pair of unit combination weights.
struct Combo {
  Eigen::VectorXd lambda;
  Eigen::VectorXd mu;
};

struct TensorRingParams {
  double radius_sq = 1.0;
  double kappa = 1.0;
  double eta = 0.0;
  int degree = 4;
};

/// R² = max_a S_aa and κ = (λ_m(S)/2)^{1/2}, both valid for the ground truth.
TensorRingParams tensor_ring_params(const Eigen::MatrixXd& s, int r, double eta, int degree = 4);

struct TensorRingProgram {
  PolynomialProgram program;
  int r = 0;
  int d = 0;
  int m = 0;
  /// q[a](i, j) is the variable index of (Q_a)_{ij}.
  std::vector<Eigen::MatrixXi> q;
  /// l(k, a), k over upper-triangular positions.
  Eigen::MatrixXi l;

  /// Full-variable assignment for a quadratic network, with L the pseudo-inverse of M.
  Eigen::VectorXd point(const PolyNetwork& net) const;
  Polynomial q_entry(int a, int i, int j) const { return Polynomial::variable(q[a](i, j)); }
};

/// Degree-4 polynomial program whose feasible points are the networks matching
/// (S, T) to within η, with Q_λ diagonal ascending and the first row of Q_μ
/// nonnegative past the diagonal.
TensorRingProgram encode_tensor_ring(const Eigen::MatrixXd& s, const Cube& t, int r, const Combo& combo,
                                     const TensorRingParams& params);

struct LowRankParams {
  int ell = 1;
  double radius_sq = 1.0;
  double kappa = 1.0;
  double eta = 0.0;
  int degree = 6;
};

/// R² = max_a S_aa / λ_min(D^{1/2}Σ_sym D^{1/2}), κ² = λ_m(S) / λ_max(DΣ_sym D).
LowRankParams lowrank_params(const Eigen::MatrixXd& s, const SigmaMatrix& sigma, int ell, double eta, int degree);

struct LowRankProgram {
  PolynomialProgram program;
  int r = 0;
  int d = 0;
  int omega = 0;
  int ell = 0;
  int m = 0;
  /// t[a][dense offset] over [r]^ω.
  std::vector<std::vector<int>> t;
  /// v[a][s][k].
  std::vector<std::vector<std::vector<int>>> v;
  Eigen::MatrixXi l;
  Eigen::MatrixXi p;

  Eigen::VectorXd point(const PolyNetwork& net, const SigmaMatrix& sigma) const;
  /// f-vector of unit a as linear polynomials in its entries.
  std::vector<Polynomial> f_polys(int a) const;
  /// (T_a) at the sorted multi-index in position `pos`.
  Polynomial t_sorted(int a, int pos) const;
};

/// Program for rank-ℓ units under ⟨·,·⟩_Σ. With a combo, the F_λ diagonal,
/// sorted and F_μ first-row families are added.
LowRankProgram encode_lowrank(const Eigen::MatrixXd& s, const SigmaMatrix& sigma, int omega,
                              const LowRankParams& params, const std::optional<Combo>& combo = std::nullopt);

/// Symmetric PSD square root via eigendecomposition.
Eigen::MatrixXd psd_sqrt(const Eigen::MatrixXd& a);

}  // namespace polymom
