#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "polymom/lowerbound.hpp"
#include "polymom/rng.hpp"

using namespace polymom;

namespace {

// a_i = i + u_i/4, b_i = i − u_i/4 with u on the unit sphere.
MatchedPair literal_pair(int r, Stream& rng) {
  const Eigen::VectorXd u = rng.normal_vector(r).normalized();
  MatchedPair p;
  p.r = r;
  p.a = Eigen::VectorXd::LinSpaced(r, 1, r) + u / 4.0;
  p.b = Eigen::VectorXd::LinSpaced(r, 1, r) - u / 4.0;
  p.residual = power_sum_residual(p.a, p.b);
  p.separation = (p.a - p.b).squaredNorm();
  return p;
}

double brute_force_distance(const MatchedPair& p) {
  std::vector<int> perm(p.r);
  std::iota(perm.begin(), perm.end(), 0);
  double best = INFINITY;
  do {
    double s = 0.0;
    for (int j = 0; j < p.r; ++j) s += std::abs(p.a(j) - p.b(perm[j]));
    best = std::min(best, 2.0 * s);
  } while (std::next_permutation(perm.begin(), perm.end()));
  return best;
}

}  // namespace

TEST_CASE("power_sum_residual") {
  const Eigen::Vector3d a(1.1, 2.0, 2.9), b(0.9, 2.2, 3.1);
  CHECK(power_sum_residual(a, a) == 0.0);
  CHECK(power_sum_residual(a, b) == doctest::Approx(power_sum_residual(b, a)));
  CHECK(power_sum_residual(a, Eigen::Vector3d(2.9, 1.1, 2.0)) == doctest::Approx(0.0).epsilon(1e-20));
  // r=1 uses only the first power sum.
  CHECK(power_sum_residual(Eigen::VectorXd::Constant(1, 1.0), Eigen::VectorXd::Constant(1, 2.0)) == 1.0);
}

TEST_CASE("box_violation") {
  CHECK(box_violation(Eigen::Vector2d(1.2, 1.8), Eigen::Vector2d(0.8, 2.25)) == 0.0);
  CHECK(box_violation(Eigen::Vector2d(1.5, 2.0), Eigen::Vector2d(1.0, 2.0)) == doctest::Approx(0.25));
}

TEST_CASE("build_networks") {
  Stream rng(1);
  const MatchedPair p = literal_pair(4, rng);
  const LBInstance inst = build_networks(p);
  CHECK(inst.q1.rows() == 14);
  CHECK(inst.q2.rows() == 14);
  CHECK((inst.q1 - Eigen::MatrixXd(inst.q1.diagonal().asDiagonal())).norm() == 0.0);
  CHECK(inst.q1.trace() - inst.q2.trace() == doctest::Approx(2.0 * (p.a - p.b).sum()));
  CHECK(inst.q1(0, 0) == p.a(0));
  CHECK(inst.q1(1, 1) == p.a(0));
  CHECK(inst.network1().d == 1);
}

TEST_CASE("char_function") {
  const Eigen::Vector3d c(1.0, -2.0, 0.5);
  CHECK(char_function(c, 0.0) == 1.0);
  for (double t : {0.1, 0.7, 3.0}) {
    CHECK(char_function(c, t) == char_function(c, -t));
    double expect = std::pow(1.0 + 4.0 * t * t, -3.0);
    for (int j = 0; j < 3; ++j) expect /= 1.0 + 4.0 * c(j) * c(j) * t * t;
    CHECK(char_function(c, t) == doctest::Approx(expect).epsilon(1e-14));
  }
}

TEST_CASE("char_gap") {
  Stream rng(2);
  const MatchedPair p = literal_pair(5, rng);
  const std::vector<double> grid = uniform_grid(-10.0, 10.0, 1e-2);
  const CharGap g = char_gap(p, grid);
  CHECK(g.sup_gap >= 0.0);
  CHECK(g.denominator_floor == doctest::Approx(std::pow(5.0, 10)));
  CHECK(g.denominator >= g.denominator_floor);
  SUBCASE("equal parameters have no gap") {
    MatchedPair same = p;
    same.b = same.a;
    const CharGap z = char_gap(same, grid);
    CHECK(z.sup_gap == 0.0);
    CHECK(z.analytic_bound == 0.0);
  }
  SUBCASE("the gap is even in t") {
    const CharGap pos = char_gap(p, uniform_grid(0.0, 10.0, 1e-2));
    const CharGap neg = char_gap(p, uniform_grid(-10.0, 0.0, 1e-2));
    CHECK(pos.sup_gap == doctest::Approx(neg.sup_gap).epsilon(1e-12));
  }
}

TEST_CASE("uniform_grid") {
  const auto g = uniform_grid(0.0, 1.0, 0.25);
  REQUIRE(g.size() == 5);
  CHECK(g.front() == 0.0);
  CHECK(g.back() == 1.0);
  CHECK(g[2] == 0.5);
}

TEST_CASE("param_distance_lb matches brute force and is at least one") {
  Stream rng(3);
  for (int trial = 0; trial < 50; ++trial) {
    const MatchedPair p = literal_pair(3 + trial % 4, rng);
    const double d = param_distance_lb(p);
    CHECK(d == doctest::Approx(brute_force_distance(p)).epsilon(1e-12));
    CHECK(d >= 1.0 - 1e-12);
  }
}

TEST_CASE("matched pair search at r=5 is reproducible") {
  const MatchedPair p = search_matched_pair(5);
  CHECK(p.r == 5);
  CHECK(p.parametrization == "relaxed");
  CHECK(box_violation(p.a, p.b) == 0.0);
  CHECK(p.separation == doctest::Approx(0.25).epsilon(1e-12));
  // Frozen from a reference run with the default configuration.
  const double a[5] = {1.25, 1.9135611528405014, 3.2498401845893623, 3.75, 5.25};
  const double b[5] = {1.101733861600239, 2.2499997865172396, 2.9367277319922276, 3.879407642885362,
                       5.243639814058192};
  for (int i = 0; i < 5; ++i) {
    CHECK(p.a(i) == doctest::Approx(a[i]).epsilon(1e-9));
    CHECK(p.b(i) == doctest::Approx(b[i]).epsilon(1e-9));
  }
  CHECK(p.residual == doctest::Approx(12786940.194392422).epsilon(1e-9));
  CHECK_FALSE(p.converged);
  const CharGap g = char_gap(p, uniform_grid(0.0, 50.0, 1e-3));
  const auto j = lowerbound_fixture(p, g);
  CHECK(j.at("r") == 5);
  CHECK(j.at("param_distance").get<double>() == doctest::Approx(1.867170107001607).epsilon(1e-9));
  CHECK(j.at("sup_gap").get<double>() == doctest::Approx(0.00034781851161821975).epsilon(1e-9));
}
