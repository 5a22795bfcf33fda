#pragma once

#include <cstdint>

#include "polymom/network.hpp"
#include "polymom/tensor.hpp"

namespace polymom {

struct AlignConfig {
  int restarts = 8;
  std::uint64_t rng_seed = 0;
  /// Angular step of the exhaustive scan used when r <= 2.
  double grid_step = 1e-3;
  /// Number of best structured candidates passed to local refinement.
  int refine_top = 4;
};

struct Alignment {
  double distance = 0.0;
  GaugeRotation rotation;
};

/**
 * Upper bound on min_{U∈O(r)} max_a ‖F_{U^⊗ω}(A_a) − B_a‖_F, with the rotation
 * attaining it. Candidates come from eigen-alignment of a generic combination
 * of equivariant unit summaries (with sign and small permutation enumeration),
 * an angle scan for r <= 2, and Haar restarts; each is polished by
 * Levenberg–Marquardt on a Cayley chart of O(r).
 */
Alignment gauge_distance(const PolyNetwork& a, const PolyNetwork& b, const AlignConfig& cfg = {});

/// max_a ‖F_{U^⊗ω}(A_a) − B_a‖_F for a fixed U.
double aligned_distance(const PolyNetwork& a, const PolyNetwork& b, const Eigen::MatrixXd& u);

}  // namespace polymom
