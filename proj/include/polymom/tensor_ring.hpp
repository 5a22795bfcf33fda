#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "polymom/moments.hpp"
#include "polymom/network.hpp"
#include "polymom/programs.hpp"
#include "polymom/relaxation.hpp"

namespace polymom {

/// Combination weights with the two measured non-degeneracy quantities.
struct NonDegenCombo {
  Eigen::VectorXd lambda;
  Eigen::VectorXd mu;
  /// Filled by validate_nondegeneracy when a network is available.
  std::optional<double> eigengap;
  std::optional<double> min_entry;

  Combo combo() const { return {lambda, mu}; }
};

/**
 * Random combinations from an approximate Gram matrix of r×r symmetric units.
 * The top-m eigenpairs of ĝ give H̃ = U·diag(√σ), and λ, μ are normalized
 * Gaussian mixtures of the columns of H̃(H̃ᵀH̃)⁻¹. `rank` defaults to C(r+1,2).
 */
NonDegenCombo find_combo(const Eigen::MatrixXd& g, int r, std::uint64_t rng_seed, int rank = -1);

struct Nondegeneracy {
  double eigengap = 0.0;
  double min_entry = 0.0;
};

/// Minimum eigengap of Q_λ and min |(V Q_μ Vᵀ)_ij| with V from Q_λ's eigenvectors.
Nondegeneracy validate_nondegeneracy(const PolyNetwork& net, const Eigen::VectorXd& lambda,
                                     const Eigen::VectorXd& mu);

struct GaugeFixed {
  PolyNetwork net;
  GaugeRotation rotation;
};

/// Rotates so Q_λ is diagonal ascending, then flips signs so (Q_μ)_{0j} ≥ 0 for j ≥ 1.
GaugeFixed gauge_fix(const PolyNetwork& net, const Eigen::VectorXd& lambda, const Eigen::VectorXd& mu);

enum class Backend { sos, local, hybrid };

Backend parse_backend(const std::string& name);
std::string backend_name(Backend b);

struct TRConfig {
  Backend backend = Backend::local;
  int degree = 4;
  int restarts = 20;
  double tol = 1e-9;
  std::uint64_t rng_seed = 0;
  /// Units restricted to diagonal matrices.
  bool diagonal = false;
  /// Fixed combination; drawn with find_combo when absent.
  std::optional<Combo> combo;
  int max_evaluations = 2000;
  SolverConfig solver;
};

struct RecoveryReport {
  PolyNetwork recovered;
  /// max |Tr(Q̂_aQ̂_b) − S_ab| (or |⟨T̂_a,T̂_b⟩_Σ − S_ab|).
  double s_residual = 0.0;
  /// max |Tr(Q̂_aQ̂_bQ̂_c) − T_abc|; zero when there are no third moments.
  double t_residual = 0.0;
  std::optional<double> gauge_distance;
  std::string backend;
  int iterations = 0;
  int restarts_used = 0;
  std::optional<NonDegenCombo> combo;
  std::string message;
};

/**
 * Recovers {Q_a} from second and third moments. The local backend runs damped
 * least squares from `restarts` random starts and gauge-fixes the best; the
 * sos backend solves the degree-`degree` relaxation and reads off Ẽ[Q_a];
 * hybrid starts the local fit from the sos rounding.
 */
RecoveryReport decompose(const QuadraticMomentTable& moments, int r, const TRConfig& config,
                         const PolyNetwork* truth = nullptr);

/// Max moment residuals of a quadratic network against (S, T).
std::pair<double, double> moment_residuals(const PolyNetwork& net, const Eigen::MatrixXd& s, const Cube& t);

/// Simultaneous diagonalization of two random contractions of T = Σ_i v_i^⊗3.
/// `rank` defaults to the numerical rank of the d×d² unfolding.
std::vector<Eigen::VectorXd> jennrich_diagonal(const Cube& t, std::uint64_t rng_seed = 0, int rank = -1);

/// Diagonal quadratic network with (Q_a)_ii = (v_i)_a.
PolyNetwork diagonal_network(const std::vector<Eigen::VectorXd>& v);

/// Least-squares tail units Q̂_{d'+1..d} from S and a recovered head.
std::vector<Eigen::MatrixXd> extend_tail(const Eigen::MatrixXd& s, const std::vector<Eigen::MatrixXd>& head, int d);

struct AssumptionReportTR {
  int m = 0;
  double radius = 0.0;
  double sigma_m = 0.0;
  std::optional<double> predicted_kappa;
  std::optional<bool> flag;
  std::vector<std::string> warnings;
};

/// σ_m of the d×m weighted upper-triangle flattening and the Frobenius radius.
AssumptionReportTR verify_assumption_tr(const PolyNetwork& net);

/// Rows (Q_a)_ii and √2·(Q_a)_ij (i<j), so that rows dot as Tr(Q_aQ_b).
Eigen::MatrixXd weighted_flattening(const std::vector<Eigen::MatrixXd>& q);

}  // namespace polymom
