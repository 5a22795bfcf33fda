// Checks that need a pair whose power sums agree through degree 2r−1.

#include <doctest.h>

#include <cmath>

#include "polymom/lowerbound.hpp"
#include "polymom/moments.hpp"

using namespace polymom;

TEST_CASE("r=5 search reaches the residual tolerance") {
  const MatchedPair p = search_matched_pair(5);
  CHECK(p.residual <= 1e-10);
  CHECK(p.converged);
}

TEST_CASE("r=5 measured gap stays below the analytic bound") {
  const MatchedPair p = search_matched_pair(5);
  const CharGap g = char_gap(p, uniform_grid(-10.0, 10.0, 1e-3));
  CHECK(g.sup_gap <= g.analytic_bound);
}

TEST_CASE("r=5 hard networks share their first three moments") {
  const MatchedPair p = search_matched_pair(5);
  const LBInstance inst = build_networks(p);
  const QuadraticMomentTable m1 = exact_quadratic_moments(inst.network1());
  const QuadraticMomentTable m2 = exact_quadratic_moments(inst.network2());
  CHECK(std::abs(m1.mu(0) - m2.mu(0)) <= 1e-8);
  CHECK(std::abs(m1.S(0, 0) - m2.S(0, 0)) <= 1e-8);
  CHECK(std::abs(m1.T(0, 0, 0) - m2.T(0, 0, 0)) <= 1e-8);
}
