#pragma once

#include <cstdint>
#include <functional>

#include <Eigen/Dense>

#include "polymom/network.hpp"
#include "polymom/rng.hpp"

namespace polymom {

/// Seed law for x: standard Gaussian, or rotation invariant with a radial law.
struct SeedDistribution {
  enum class Kind { gaussian, rotation_invariant };
  Kind kind = Kind::gaussian;
  /// e ↦ E‖x‖^e (rotation-invariant only).
  std::function<double(int)> radial_moment;
  /// Draws ‖x‖ (rotation-invariant only).
  std::function<double(Stream&)> radial_sampler;

  static SeedDistribution gaussian();
  /// Uniform on the sphere of the given radius.
  static SeedDistribution sphere(double radius);
};

/// E‖g‖^e for g ~ N(0, Id_r): 2^{e/2} Γ((r+e)/2) / Γ(r/2).
double gaussian_norm_moment(int r, int e);

/// n×d matrix whose row k is (⟨T_1, x_k^⊗ω⟩, …, ⟨T_d, x_k^⊗ω⟩).
Eigen::MatrixXd sample(const PolyNetwork& net, const SeedDistribution& seed, std::int64_t n, std::uint64_t rng_seed);

/// Draws the seeds themselves (n×r), using the same streams as sample().
Eigen::MatrixXd sample_seeds(int r, const SeedDistribution& seed, std::int64_t n, std::uint64_t rng_seed);

struct SmoothingParams {
  double rho = 0.0;
  PolyNetwork base;
  std::uint64_t rng_seed = 0;
};

/// Q*_a = Q̄_a + (ρ/√r) G_a with G_a symmetric, i.i.d. N(0,1) on and above the diagonal.
PolyNetwork smooth_quadratic(const SmoothingParams& params);

/// v*_{a,t} = v̄_{a,t} + (ρ/√r) g_{a,t}.
PolyNetwork smooth_componentwise(const SmoothingParams& params);

PolyNetwork zero_quadratic(int r, int d);
PolyNetwork zero_lowrank(int r, int d, int omega, int ell);

/// dist · √d · E‖x‖^ω.
double w1_upper_bound(double dist, int r, int d, int omega, const SeedDistribution& seed);

}  // namespace polymom
