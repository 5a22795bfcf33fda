#include <doctest.h>

#include <cmath>
#include <sstream>

#include "polymom/error.hpp"
#include "polymom/model.hpp"
#include "polymom/moments.hpp"
#include "polymom/programs.hpp"
#include "polymom/relaxation.hpp"
#include "polymom/rng.hpp"
#include "polymom/tensor_ring.hpp"

using namespace polymom;

namespace {

Polynomial x(int i) { return Polynomial::variable(i); }

double min_eig(const Eigen::MatrixXd& m) {
  return Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(m).eigenvalues().minCoeff();
}

PolyNetwork smoothed(int r, int d, std::uint64_t seed) {
  SmoothingParams p;
  p.base = zero_quadratic(r, d);
  p.rho = 0.5;
  p.rng_seed = seed;
  return smooth_quadratic(p);
}

}  // namespace

TEST_CASE("linear equality pins the first moment") {
  PolynomialProgram prog;
  prog.add_variable("x");
  prog.degree = 2;
  prog.add_equality(x(0) - 0.5, "pin");
  const SolveResult res = solve(prog);
  REQUIRE(res.feasible());
  CHECK(res.pe(x(0)) == doctest::Approx(0.5).epsilon(1e-6));
  CHECK(res.pe(Polynomial(1.0)) == doctest::Approx(1.0));
}

TEST_CASE("x^2 = 1 at degree 4") {
  PolynomialProgram prog;
  prog.add_variable("x");
  prog.degree = 4;
  prog.add_equality(x(0) * x(0) - 1.0, "sphere");
  const SolveResult res = solve(prog);
  REQUIRE(res.feasible());
  CHECK(res.pe(x(0) * x(0)) == doctest::Approx(1.0).epsilon(1e-6));
  CHECK(res.pe(x(0) * x(0) * x(0) * x(0)) == doctest::Approx(1.0).epsilon(1e-6));
  // Pseudo Cauchy–Schwarz: Ẽ[x]² ≤ Ẽ[x²].
  const double m1 = res.pe(x(0));
  CHECK(m1 * m1 <= res.pe(x(0) * x(0)) + 1e-6);
  CHECK(min_eig(res.pe.moment_matrix()) >= -1e-6);
}

TEST_CASE("infeasible constraints are reported") {
  PolynomialProgram prog;
  prog.add_variable("x");
  prog.degree = 2;
  prog.add_equality(x(0) * x(0) + 1.0, "impossible");
  CHECK_FALSE(solve(prog).feasible());
}

TEST_CASE("pseudo-expectation is linear and nonnegative on squares") {
  PolynomialProgram prog;
  for (const char* n : {"x", "y"}) prog.add_variable(n);
  prog.degree = 4;
  prog.add_equality(x(0) * x(0) + x(1) * x(1) - 1.0, "circle");
  const SolveResult res = solve(prog);
  REQUIRE(res.feasible());
  const std::vector<Monomial> basis = monomial_basis({0, 1}, 2);
  Stream rng(3);
  for (int trial = 0; trial < 100; ++trial) {
    const Eigen::VectorXd c = rng.normal_vector(static_cast<int>(basis.size()));
    Polynomial p;
    for (size_t k = 0; k < basis.size(); ++k) p += Polynomial::monomial(basis[k], c(static_cast<Eigen::Index>(k)));
    CHECK(res.pe(p * p) >= -1e-6 * c.squaredNorm());
    const Polynomial q = x(0) * x(1) - 2.0 * x(1);
    CHECK(res.pe(p + 3.0 * q) == doctest::Approx(res.pe(p) + 3.0 * res.pe(q)).epsilon(1e-10));
    CHECK(pseudo_expect(res.pe, p) == res.pe(p));
  }
}

TEST_CASE("program validation") {
  PolynomialProgram prog;
  prog.add_variable("x");
  prog.degree = 2;
  CHECK_NOTHROW(prog.validate());
  SUBCASE("above the relaxation degree") {
    prog.add_equality(x(0) * x(0) * x(0), "cubic");
    CHECK_THROWS_AS(prog.validate(), DomainError);
  }
  SUBCASE("undeclared variable") {
    prog.add_equality(x(3), "undeclared");
    CHECK_THROWS_AS(prog.validate(), DomainError);
  }
}

TEST_CASE("degree-4 tensor ring program at r=1, d=1") {
  const PolyNetwork net = PolyNetwork::quadratic({Eigen::MatrixXd::Constant(1, 1, 1.0)});
  const QuadraticMomentTable m = exact_quadratic_moments(net);
  CHECK(m.S(0, 0) == 1.0);
  CHECK(m.T(0, 0, 0) == 1.0);
  const Combo c{Eigen::VectorXd::Ones(1), Eigen::VectorXd::Ones(1)};
  const TensorRingProgram prog = encode_tensor_ring(m.S, m.T, 1, c, tensor_ring_params(m.S, 1, 0.0));
  CHECK(prog.program.max_violation(prog.point(net)) <= 1e-12);
  const SolveResult res = solve(prog.program);
  REQUIRE(res.feasible());
  CHECK(res.pe(prog.q_entry(0, 0, 0)) == doctest::Approx(1.0).epsilon(1e-4));
}

TEST_CASE("tensor ring encoding") {
  const int r = 2, d = 3;
  const PolyNetwork net = smoothed(r, d, 4);
  const QuadraticMomentTable m = exact_quadratic_moments(net);
  const NonDegenCombo nc = find_combo(m.S, r, 4, 3);
  const TensorRingProgram prog = encode_tensor_ring(m.S, m.T, r, nc.combo(), tensor_ring_params(m.S, r, 0.0));
  SUBCASE("families are declared with their counts") {
    int total = 0;
    for (const auto& [family, count] : prog.program.family_counts()) total += count;
    CHECK(total == static_cast<int>(prog.program.equalities.size() + prog.program.inequalities.size()));
    CHECK(prog.program.families.size() == prog.program.family_counts().size());
    std::ostringstream os;
    dump_relaxation(prog.program, os);
    CHECK(os.str().find(prog.program.families.front()) != std::string::npos);
  }
  SUBCASE("the gauge-fixed ground truth is feasible") {
    const GaugeFixed g = gauge_fix(net, nc.lambda, nc.mu);
    CHECK(prog.program.max_violation(prog.point(g.net)) <= 1e-9);
  }
  SUBCASE("deterministic") {
    const TensorRingProgram again =
        encode_tensor_ring(m.S, m.T, r, nc.combo(), tensor_ring_params(m.S, r, 0.0));
    CHECK(again.program.variables == prog.program.variables);
    CHECK(again.program.equalities.size() == prog.program.equalities.size());
    for (size_t k = 0; k < prog.program.equalities.size(); ++k)
      CHECK(again.program.equalities[k].p == prog.program.equalities[k].p);
  }
}

TEST_CASE("low-rank encoding") {
  const int r = 2, omega = 3, ell = 1;
  Stream rng(5);
  std::vector<std::vector<Eigen::VectorXd>> comps(5);
  for (auto& unit : comps) unit.push_back(rng.normal_vector(r));
  const PolyNetwork net = PolyNetwork::lowrank(omega, comps);
  const SigmaMatrix sigma = sigma_matrix(r, omega);
  const PairMomentTable m = exact_pair_moments(net);
  const LowRankProgram prog = encode_lowrank(m.S, sigma, omega, lowrank_params(m.S, sigma, ell, 0.0, 6));
  CHECK(prog.program.max_violation(prog.point(net, sigma)) <= 1e-9);
  CHECK(prog.f_polys(0).size() == static_cast<size_t>(r));
}

TEST_CASE("psd_sqrt") {
  Stream rng(6);
  const Eigen::MatrixXd g = rng.normal_matrix(4, 4);
  const Eigen::MatrixXd a = g * g.transpose();
  const Eigen::MatrixXd s = psd_sqrt(a);
  CHECK((s * s - a).norm() <= 1e-10 * a.norm());
  CHECK((s - s.transpose()).norm() <= 1e-14 * s.norm());
  CHECK(min_eig(s) >= -1e-12);
}

TEST_CASE("solve is deterministic") {
  PolynomialProgram prog;
  for (const char* n : {"x", "y"}) prog.add_variable(n);
  prog.degree = 2;
  prog.add_equality(x(0) + x(1) - 1.0, "line");
  prog.add_inequality(x(0), "nonneg");
  const SolveResult a = solve(prog), b = solve(prog);
  CHECK(a.pe.values == b.pe.values);
}
