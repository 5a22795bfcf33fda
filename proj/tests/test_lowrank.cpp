#include <doctest.h>

#include <cmath>

#include "polymom/error.hpp"
#include "polymom/gauge.hpp"
#include "polymom/lowrank.hpp"
#include "polymom/model.hpp"
#include "polymom/moments.hpp"
#include "polymom/rng.hpp"
#include "polymom/tensor.hpp"

using namespace polymom;

namespace {

PolyNetwork smoothed_lowrank(int r, int d, int omega, int ell, std::uint64_t seed) {
  SmoothingParams p;
  p.base = zero_lowrank(r, d, omega, ell);
  p.rho = 0.5;
  p.rng_seed = seed;
  return smooth_componentwise(p);
}

}  // namespace

TEST_CASE("f_vector") {
  SUBCASE("rank one cube gives |v|^2 v") {
    const Eigen::Vector3d v(1, -2, 0.5);
    const Eigen::VectorXd f = f_vector(outer_power(v, 3));
    CHECK((f - v.squaredNorm() * v).norm() < 1e-12);
    CHECK((f_vector(SymTensor::symmetrize(outer_power(v, 3))) - f).norm() < 1e-12);
  }
  SUBCASE("order five contracts two pairs") {
    const Eigen::Vector2d v(0.3, -1.1);
    const Eigen::VectorXd f = f_vector(outer_power(v, 5));
    CHECK((f - std::pow(v.squaredNorm(), 2) * v).norm() < 1e-12);
  }
  SUBCASE("hand-written order three entries") {
    DenseTensor t(3, 2);
    t({0, 0, 1}) = 1.0;
    t({1, 1, 1}) = 3.0;
    const Eigen::VectorXd f = f_vector(t);
    CHECK(f(0) == 0.0);
    CHECK(f(1) == 4.0);
  }
  SUBCASE("even order is rejected") {
    CHECK_THROWS_AS(f_vector(DenseTensor(2, 3)), DomainError);
  }
}

TEST_CASE("r=1 recovers up to the global sign") {
  const PolyNetwork net = PolyNetwork::lowrank(
      3, {{Eigen::VectorXd::Constant(1, -2.0)}, {Eigen::VectorXd::Constant(1, 1.0)}, {Eigen::VectorXd::Constant(1, 0.5)}});
  const PairMomentTable m = exact_pair_moments(net);
  CHECK(m.S(0, 0) == doctest::Approx(15.0 * 64.0));
  const RecoveryReport rep = factorize(m, 1, 3, 1, LRConfig{}, &net);
  REQUIRE(rep.gauge_distance.has_value());
  CHECK(*rep.gauge_distance <= 1e-8);
  // The anchor makes the largest-magnitude entry positive.
  CHECK(rep.recovered.unit(0).values()(0) > 0.0);
}

TEST_CASE("local factorization of a smoothed network") {
  const PolyNetwork net = smoothed_lowrank(2, 6, 3, 1, 4);
  const PairMomentTable m = exact_pair_moments(net);
  const RecoveryReport rep = factorize(m, 2, 3, 1, LRConfig{}, &net);
  REQUIRE(rep.gauge_distance.has_value());
  CHECK(*rep.gauge_distance <= 1e-6);
  CHECK(pair_residual(rep.recovered, m.S, SigmaMode::gaussian) <= 1e-8);
  CHECK(pair_residual(net, m.S, SigmaMode::gaussian) <= 1e-12 * m.S.norm());
}

TEST_CASE("lowrank_gauge is canonical") {
  Stream rng(5);
  for (int trial = 0; trial < 10; ++trial) {
    const PolyNetwork net = smoothed_lowrank(2, 6, 3, 1, 20 + trial);
    const Eigen::VectorXd lambda = rng.normal_vector(6).normalized(), mu = rng.normal_vector(6).normalized();
    const PolyNetwork rot = rotate_network(net, GaugeRotation(random_orthogonal(2, rng)));
    const PolyNetwork a = rotate_network(net, lowrank_gauge(net, lambda, mu));
    const PolyNetwork b = rotate_network(rot, lowrank_gauge(rot, lambda, mu));
    for (int u = 0; u < 6; ++u) CHECK((a.unit(u).values() - b.unit(u).values()).norm() <= 1e-8);
  }
}

TEST_CASE("f_network holds the rank-one F matrices") {
  const PolyNetwork net = smoothed_lowrank(3, 4, 3, 2, 6);
  const PolyNetwork f = f_network(net);
  CHECK(f.kind == NetworkKind::quadratic);
  for (int a = 0; a < 4; ++a) {
    const Eigen::VectorXd v = f_vector(net.unit(a));
    CHECK((f.Q[a] - v * v.transpose()).norm() <= 1e-12 * std::max(1.0, v.squaredNorm()));
  }
}

TEST_CASE("extend_tail_lr") {
  const int r = 2, omega = 3, d = 9;
  const PolyNetwork net = smoothed_lowrank(r, d, omega, 1, 7);
  const SigmaMatrix sigma = sigma_matrix(r, omega);
  const PairMomentTable m = exact_pair_moments(net);
  std::vector<SymTensor> head;
  for (int a = 0; a < 5; ++a) head.push_back(net.unit_sym(a));
  const auto tail = extend_tail_lr(m.S, sigma, head, d);
  REQUIRE(tail.size() == 4);
  for (int b = 0; b < 4; ++b) CHECK((tail[b].values() - net.unit_sym(5 + b).values()).norm() <= 1e-8);
}

TEST_CASE("verify_assumption_lr") {
  SUBCASE("duplicated units make M* singular") {
    const Eigen::Vector2d v(1, 0.5);
    const PolyNetwork net = PolyNetwork::lowrank(3, {{v}, {v}, {v}, {v}});
    CHECK(verify_assumption_lr(net).sigma_min_m <= 1e-12);
  }
  SUBCASE("smoothed networks are non-degenerate") {
    int ok = 0;
    for (int seed = 0; seed < 100; ++seed)
      if (verify_assumption_lr(smoothed_lowrank(2, 10, 3, 1, seed)).sigma_min_m > 0.0) ++ok;
    CHECK(ok == 100);
  }
}

TEST_CASE("hermite_network_pair_moments") {
  SUBCASE("orthonormal vectors give the identity") {
    std::vector<std::vector<Eigen::VectorXd>> vecs;
    for (int i = 0; i < 3; ++i) vecs.push_back({Eigen::VectorXd::Unit(3, i)});
    const PairMomentTable m = hermite_network_pair_moments({{1.0}, {1.0}, {1.0}}, vecs, 3);
    CHECK((m.S - Eigen::MatrixXd::Identity(3, 3)).norm() < 1e-14);
  }
  SUBCASE("equal vectors give one") {
    const Eigen::Vector2d v = Eigen::Vector2d(1, 1).normalized();
    const PairMomentTable m = hermite_network_pair_moments({{1.0}, {1.0}}, {{v}, {v}}, 5);
    CHECK(m.S(0, 1) == doctest::Approx(1.0));
  }
  SUBCASE("matches the Frobenius product of the summed tensors") {
    Stream rng(8);
    const int r = 2, omega = 3;
    std::vector<std::vector<double>> coeffs(3);
    std::vector<std::vector<Eigen::VectorXd>> vecs(3);
    std::vector<DenseTensor> units;
    for (int a = 0; a < 3; ++a) {
      DenseTensor t(omega, r);
      for (int s = 0; s < 2; ++s) {
        coeffs[a].push_back(rng.normal());
        vecs[a].push_back(rng.normal_vector(r).normalized());
        t.values() += coeffs[a][s] * outer_power(vecs[a][s], omega).values();
      }
      units.push_back(t);
    }
    const PairMomentTable m = hermite_network_pair_moments(coeffs, vecs, omega);
    for (int a = 0; a < 3; ++a)
      for (int b = 0; b < 3; ++b) CHECK(m.S(a, b) == doctest::Approx(frobenius(units[a], units[b])).epsilon(1e-12));
  }
}
