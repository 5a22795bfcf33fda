#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include <Eigen/Dense>

#include "polymom/tensor.hpp"

namespace polymom {

enum class NetworkKind { quadratic, lowrank, tensor };

/// Provenance recorded by the smoothing generators.
struct SmoothingInfo {
  double rho = 0.0;
  std::uint64_t seed = 0;
};

/**
 * A polynomial network T_1..T_d of degree ω in r seed coordinates.
 *
 * quadratic: symmetric r×r matrices Q_a (ω = 2).
 * lowrank:   components v_{a,t}, T_a = Σ_t v_{a,t}^⊗ω, ω odd.
 * tensor:    arbitrary symmetric tensors, as produced by tail extension and
 *            the relaxation rounding.
 */
struct PolyNetwork {
  NetworkKind kind = NetworkKind::quadratic;
  int r = 0;
  int d = 0;
  int omega = 2;
  int ell = 0;
  std::vector<Eigen::MatrixXd> Q;
  std::vector<std::vector<Eigen::VectorXd>> components;
  std::vector<SymTensor> tensors;
  std::optional<SmoothingInfo> smoothing;

  static PolyNetwork quadratic(std::vector<Eigen::MatrixXd> q);
  static PolyNetwork lowrank(int omega, std::vector<std::vector<Eigen::VectorXd>> components);
  static PolyNetwork general(std::vector<SymTensor> tensors);

  /// Throws DomainError when the stored data contradicts the declared shape.
  void validate() const;

  DenseTensor unit(int a) const;
  SymTensor unit_sym(int a) const;
  std::vector<DenseTensor> units() const;

  /// max_a ‖T_a‖_F.
  double radius() const;

  /// ⟨T_a, x^⊗ω⟩.
  double evaluate(int a, const Eigen::VectorXd& x) const;
};

PolyNetwork rotate_network(const PolyNetwork& net, const GaugeRotation& v);

/// Equivariant r×r summary of a unit: Q itself for ω = 2, f fᵀ for odd ω, and
/// the pairwise contraction down to two free indices for even ω > 2.
Eigen::MatrixXd equivariant_matrix(const DenseTensor& t);

/// f_k = Σ_{j_1..j_p} T_{j_1 j_1 .. j_p j_p k} with p = ⌊ω/2⌋ (ω odd).
Eigen::VectorXd contract_pairs(const DenseTensor& t);

}  // namespace polymom
