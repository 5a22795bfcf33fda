#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "polymom/error.hpp"
#include "polymom/gauge.hpp"
#include "polymom/network.hpp"
#include "polymom/rng.hpp"
#include "polymom/tensor.hpp"

using namespace polymom;

namespace {

DenseTensor random_symmetric(int order, int r, Stream& rng) {
  return SymTensor::symmetrize(DenseTensor(order, r, rng.normal_vector(static_cast<int>(ipow(r, order))))).to_dense();
}

PolyNetwork random_quadratic(int r, int d, Stream& rng) {
  std::vector<Eigen::MatrixXd> q;
  for (int a = 0; a < d; ++a) {
    const Eigen::MatrixXd g = rng.normal_matrix(r, r);
    q.push_back(0.5 * (g + g.transpose()));
  }
  return PolyNetwork::quadratic(q);
}

}  // namespace

TEST_CASE("multiplicity counts permutations of a multiset") {
  CHECK(multiplicity({0, 0, 1}, 2) == 3);
  CHECK(multiplicity({0, 1}, 2) == 2);
  CHECK(multiplicity({0, 0, 0}, 2) == 1);
  CHECK_THROWS_AS(multiplicity({0, 2}, 2), DomainError);
}

TEST_CASE("multiplicities sum to r^omega") {
  for (int r = 1; r <= 5; ++r)
    for (int w = 1; w <= 5; ++w) {
      const auto tab = index_table(r, w);
      std::int64_t total = 0;
      for (auto m : tab->mult) total += m;
      CHECK(total == ipow(r, w));
      CHECK(tab->size() == binomial(r + w - 1, w));
    }
}

TEST_CASE("reshapings use lexicographic layout") {
  Eigen::MatrixXd m(2, 2);
  m << 1, 2, 3, 4;
  const Eigen::VectorXd v = vec(m);
  CHECK(v(0) == 1);
  CHECK(v(1) == 2);
  CHECK(v(2) == 3);
  CHECK(v(3) == 4);
  CHECK(mat(v) == m);
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) {
      Eigen::VectorXd e = Eigen::VectorXd::Zero(9);
      e(i * 3 + j) = 1.0;
      const Eigen::MatrixXd expect = Eigen::VectorXd::Unit(3, i) * Eigen::RowVectorXd::Unit(3, j);
      CHECK(mat(e) == expect);
    }
  Stream rng(1);
  const DenseTensor t(3, 3, rng.normal_vector(27));
  CHECK(ten(vec(t), 3, 3).values() == t.values());
  CHECK_THROWS_AS(mat(Eigen::VectorXd::Zero(5)), DomainError);
}

TEST_CASE("apply_transform with identity and with V⊗V") {
  Stream rng(2);
  const DenseTensor t = random_symmetric(2, 3, rng);
  const DenseTensor same = apply_transform(Eigen::MatrixXd::Identity(9, 9), t);
  CHECK((same.values() - t.values()).norm() == 0.0);
  const Eigen::MatrixXd v = random_orthogonal(3, rng);
  const Eigen::MatrixXd q = to_matrix(t);
  const Eigen::MatrixXd out = to_matrix(apply_transform(kron_power(v, 2), t));
  CHECK((out - v * q * v.transpose()).norm() < 1e-12);
  CHECK_THROWS_AS(apply_transform(Eigen::MatrixXd::Identity(4, 4), t), DomainError);
}

TEST_CASE("quarter turn swaps diag(1,2)") {
  Eigen::MatrixXd v(2, 2);
  v << 0, -1, 1, 0;
  Eigen::MatrixXd q = Eigen::Vector2d(1, 2).asDiagonal();
  // Direct 4×4 product of V⊗V with vec(Q) = (1,0,0,2).
  Eigen::Matrix4d k;
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j)
      for (int p = 0; p < 2; ++p)
        for (int s = 0; s < 2; ++s) k(i * 2 + j, p * 2 + s) = v(i, p) * v(j, s);
  const Eigen::Vector4d oracle = k * Eigen::Vector4d(1, 0, 0, 2);
  const DenseTensor out = apply_transform(kron_power(v, 2), from_matrix(q));
  CHECK((out.values() - oracle).norm() < 1e-15);
  CHECK(to_matrix(out)(0, 0) == doctest::Approx(2.0));
  CHECK(to_matrix(out)(1, 1) == doctest::Approx(1.0));
  CHECK(std::abs(to_matrix(out)(0, 1)) < 1e-15);
}

TEST_CASE("apply_transform composes") {
  Stream rng(3);
  const DenseTensor t = random_symmetric(3, 2, rng);
  const Eigen::MatrixXd u1 = rng.normal_matrix(8, 8), u2 = rng.normal_matrix(8, 8);
  const DenseTensor lhs = apply_transform(u1 * u2, t);
  const DenseTensor rhs = apply_transform(u1, apply_transform(u2, t));
  CHECK((lhs.values() - rhs.values()).norm() < 1e-10 * std::max(1.0, lhs.norm()));
}

TEST_CASE("rotation preserves the Frobenius norm and matches the Kronecker power") {
  Stream rng(4);
  for (int trial = 0; trial < 20; ++trial) {
    const int r = 1 + trial % 3, w = 2 + trial % 3;
    const DenseTensor t = random_symmetric(w, r, rng);
    const Eigen::MatrixXd v = random_orthogonal(r, rng);
    const DenseTensor rot = rotate_tensor(v, t);
    CHECK(std::abs(rot.norm() - t.norm()) < 1e-9);
    CHECK((rot.values() - apply_transform(kron_power(v, w), t).values()).norm() < 1e-10);
  }
}

TEST_CASE("GaugeRotation rejects non-orthogonal matrices") {
  Eigen::MatrixXd m = Eigen::MatrixXd::Identity(2, 2);
  m(0, 1) = 1e-6;
  CHECK_THROWS_AS(GaugeRotation{m}, DomainError);
  CHECK_NOTHROW(GaugeRotation{Eigen::MatrixXd::Identity(3, 3)});
}

TEST_CASE("rotate_network") {
  Stream rng(5);
  const PolyNetwork net = random_quadratic(3, 4, rng);
  SUBCASE("identity leaves the network unchanged") {
    const PolyNetwork same = rotate_network(net, GaugeRotation::identity(3));
    for (int a = 0; a < 4; ++a) CHECK((same.Q[a] - net.Q[a]).norm() == 0.0);
  }
  SUBCASE("traces of products are invariant") {
    const PolyNetwork rot = rotate_network(net, GaugeRotation(random_orthogonal(3, rng)));
    for (int a = 0; a < 4; ++a)
      for (int b = 0; b < 4; ++b)
        CHECK((rot.Q[a] * rot.Q[b]).trace() == doctest::Approx((net.Q[a] * net.Q[b]).trace()).epsilon(1e-12));
  }
  SUBCASE("rank-ell components rotate like their tensors") {
    std::vector<std::vector<Eigen::VectorXd>> comps(3);
    for (auto& unit : comps)
      for (int t = 0; t < 2; ++t) unit.push_back(rng.normal_vector(2));
    const PolyNetwork lr = PolyNetwork::lowrank(3, comps);
    const Eigen::MatrixXd v = random_orthogonal(2, rng);
    const PolyNetwork rot = rotate_network(lr, GaugeRotation(v));
    for (int a = 0; a < 3; ++a) {
      // Brute-force expansion of Σ_t (V v_t)^⊗3.
      DenseTensor expect(3, 2);
      for (const auto& c : comps[a]) {
        const Eigen::VectorXd w = v * c;
        for (int i = 0; i < 2; ++i)
          for (int j = 0; j < 2; ++j)
            for (int k = 0; k < 2; ++k) expect({i, j, k}) += w(i) * w(j) * w(k);
      }
      CHECK((rot.unit(a).values() - expect.values()).norm() < 1e-12);
      CHECK((rotate_tensor(v, lr.unit(a)).values() - expect.values()).norm() < 1e-12);
    }
  }
}

TEST_CASE("gauge_distance") {
  Stream rng(6);
  SUBCASE("identical networks") {
    const PolyNetwork net = random_quadratic(3, 4, rng);
    CHECK(gauge_distance(net, net).distance <= 1e-10);
  }
  SUBCASE("rotated copies are at distance zero") {
    for (int r = 1; r <= 3; ++r) {
      const PolyNetwork net = random_quadratic(r, 4, rng);
      const PolyNetwork rot = rotate_network(net, GaugeRotation(random_orthogonal(r, rng)));
      CHECK(gauge_distance(net, rot).distance <= 1e-8);
    }
    std::vector<std::vector<Eigen::VectorXd>> comps(4);
    for (auto& unit : comps) unit.push_back(rng.normal_vector(2));
    const PolyNetwork lr = PolyNetwork::lowrank(3, comps);
    CHECK(gauge_distance(lr, rotate_network(lr, GaugeRotation(random_orthogonal(2, rng)))).distance <= 1e-8);
  }
  SUBCASE("r=1 sign flip cannot be undone") {
    const PolyNetwork a = PolyNetwork::quadratic({Eigen::MatrixXd::Constant(1, 1, 1.0)});
    const PolyNetwork b = PolyNetwork::quadratic({Eigen::MatrixXd::Constant(1, 1, -1.0)});
    CHECK(gauge_distance(a, b).distance == doctest::Approx(2.0).epsilon(1e-12));
  }
  SUBCASE("symmetric in its arguments") {
    for (int trial = 0; trial < 10; ++trial) {
      const int r = 2 + trial % 2;
      const PolyNetwork a = random_quadratic(r, 3, rng), b = random_quadratic(r, 3, rng);
      CHECK(std::abs(gauge_distance(a, b).distance - gauge_distance(b, a).distance) <= 1e-6);
    }
  }
  SUBCASE("the returned rotation attains the distance") {
    const PolyNetwork a = random_quadratic(3, 3, rng), b = random_quadratic(3, 3, rng);
    const Alignment al = gauge_distance(a, b);
    CHECK(aligned_distance(a, b, al.rotation.matrix()) == doctest::Approx(al.distance).epsilon(1e-12));
  }
  SUBCASE("deterministic given the seed") {
    const PolyNetwork a = random_quadratic(3, 3, rng), b = random_quadratic(3, 3, rng);
    CHECK(gauge_distance(a, b).distance == gauge_distance(a, b).distance);
  }
  SUBCASE("shape mismatch") {
    CHECK_THROWS_AS(gauge_distance(random_quadratic(2, 3, rng), random_quadratic(2, 4, rng)), DomainError);
  }
}
