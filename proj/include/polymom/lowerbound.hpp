#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "polymom/network.hpp"

namespace polymom {

/// Pair of interlaced parameter vectors a_i, b_i ∈ [i − 1/4, i + 1/4] (i from 1).
struct MatchedPair {
  int r = 0;
  Eigen::VectorXd a;
  Eigen::VectorXd b;
  /// Σ_{ℓ=1}^{2r−1} (p_ℓ(a) − p_ℓ(b))² with p_ℓ the power sums.
  double residual = 0.0;
  /// Σ (a_i − b_i)².
  double separation = 0.0;
  bool converged = false;
  std::string parametrization;
};

double power_sum_residual(const Eigen::VectorXd& a, const Eigen::VectorXd& b);
/// Largest distance of any entry outside its box (0 when all boxes hold).
double box_violation(const Eigen::VectorXd& a, const Eigen::VectorXd& b);

enum class PairForm {
  /// Independent a, b in their boxes with Σ(a − b)² = 1/4.
  relaxed,
  /// a = i + v/4, b = i − v/4 with v on the unit sphere.
  literal,
};

struct PairSearchConfig {
  int restarts = 50;
  double tol = 1e-10;
  std::uint64_t rng_seed = 0;
  PairForm form = PairForm::relaxed;
  int max_evaluations = 2000;
};

/// Damped least squares over the chosen parametrization; returns the best restart.
MatchedPair search_matched_pair(int r, const PairSearchConfig& config = {});

struct LBInstance {
  Eigen::MatrixXd q1;
  Eigen::MatrixXd q2;

  PolyNetwork network1() const { return PolyNetwork::quadratic({q1}); }
  PolyNetwork network2() const { return PolyNetwork::quadratic({q2}); }
};

/// diag(a₁,a₁,…,a_r,a_r,1,1,1,−1,−1,−1) and the b analogue (side 2r+6).
LBInstance build_networks(const MatchedPair& pair);

/// (1+4t²)^{-3} Π_j (1+4c_j²t²)^{-1}.
double char_function(const Eigen::VectorXd& c, double t);

struct CharGap {
  double sup_gap = 0.0;
  double analytic_bound = 0.0;
  /// Π_j (a_j + b_{r+1−j})².
  double denominator = 0.0;
  /// r^{2r}, the product of the per-factor lower bounds.
  double denominator_floor = 0.0;
};

CharGap char_gap(const MatchedPair& pair, const std::vector<double>& t_grid);

/// Uniform grid from lo to hi inclusive.
std::vector<double> uniform_grid(double lo, double hi, double step);

/// min over matchings π of 2 Σ_j |a_j − b_{π(j)}|.
double param_distance_lb(const MatchedPair& pair);

/// Fixture document {r, a, b, residual, sup_gap, analytic_bound, param_distance}.
nlohmann::json lowerbound_fixture(const MatchedPair& pair, const CharGap& gap);

}  // namespace polymom
