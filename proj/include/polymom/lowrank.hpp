#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "polymom/model.hpp"
#include "polymom/moments.hpp"
#include "polymom/network.hpp"
#include "polymom/relaxation.hpp"
#include "polymom/tensor_ring.hpp"

namespace polymom {

/// f_k = Σ_{j_1..j_p} T_{j_1 j_1 ⋯ j_p j_p k}, p = ⌊ω/2⌋. Throws DomainError for even ω.
Eigen::VectorXd f_vector(const SymTensor& t);
Eigen::VectorXd f_vector(const DenseTensor& t);

struct LRConfig {
  Backend backend = Backend::local;
  int stage1_degree = 6;
  int stage2_degree = 6;
  int restarts = 20;
  double tol = 1e-9;
  std::uint64_t rng_seed = 0;
  SigmaMode sigma = SigmaMode::gaussian;
  /// Seed law behind Σ in gaussian mode; rotation-invariant laws rescale by C_{D,2ω}.
  SeedDistribution seed = SeedDistribution::gaussian();
  int max_evaluations = 4000;
  SolverConfig solver;
};

/**
 * Recovers rank-ℓ units from S_ab = ⟨T_a, T_b⟩_Σ. The local backend fits
 * components by damped least squares and fixes the gauge through the matrices
 * F_a = f_a f_aᵀ plus the argmax sign anchor; the sos backend runs the two
 * relaxation stages, reads magnitudes Ẽ₂[(T_a)_i²]^{1/2} and signs
 * Ẽ₂[(T_a)_i (T_{a*})_{i*}]; hybrid refits components starting from the sos output.
 */
RecoveryReport factorize(const PairMomentTable& moments, int r, int omega, int ell, const LRConfig& config,
                         const PolyNetwork* truth = nullptr);

/// Rotation taking a network to its F-gauge-fixed form under (λ, μ), with the
/// sign chosen so the largest-magnitude entry of the result is positive.
GaugeRotation lowrank_gauge(const PolyNetwork& net, const Eigen::VectorXd& lambda, const Eigen::VectorXd& mu);

/// Quadratic network of the F_a = f_a f_aᵀ matrices.
PolyNetwork f_network(const PolyNetwork& net);

/// max_{a≤b} |⟨T_a, T_b⟩_Σ − S_ab| for any network kind.
double pair_residual(const PolyNetwork& net, const Eigen::MatrixXd& s, SigmaMode mode,
                     const SeedDistribution& seed = SeedDistribution::gaussian());

/// Per-unit least squares T̂_b = argmin Σ_{a≤d'} (S_ab − ⟨T̂_a, T̂⟩_Σ)² over symmetric T̂.
std::vector<SymTensor> extend_tail_lr(const Eigen::MatrixXd& s, const SigmaMatrix& sigma,
                                      const std::vector<SymTensor>& head, int d);

struct AssumptionLimits {
  std::int64_t max_cols = 20000;
};

struct AssumptionReportLR {
  double radius = 0.0;
  double sigma_min_m = 0.0;
  double sigma_min_h = 0.0;
  std::optional<double> sigma_min_k;
  int k_order = 0;
  std::int64_t k_cols = 0;
  std::optional<double> predicted_psi;
  std::optional<bool> flag;
  std::vector<std::string> warnings;
};

/// σ_min of M* (sorted entries), H (rows (f_a)_i (f_a)_j, i ≤ j) and, within
/// the column cap, K^{(e)} with e = ω(ℓ+1) built from concatenated components.
AssumptionReportLR verify_assumption_lr(const PolyNetwork& net, const AssumptionLimits& limits = {});

/// S_ab = Σ_{t,t'} c_{a,t} c_{b,t'} ⟨v_{a,t}, v_{b,t'}⟩^ω for unit vectors v.
PairMomentTable hermite_network_pair_moments(const std::vector<std::vector<double>>& coeffs,
                                             const std::vector<std::vector<Eigen::VectorXd>>& vectors, int omega);

}  // namespace polymom
