#include "polymom/lowerbound.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "polymom/error.hpp"
#include "polymom/io.hpp"
#include "polymom/lsq.hpp"
#include "polymom/rng.hpp"

namespace polymom {

namespace {

constexpr std::uint64_t kPairUnit = 0xb0b0;
constexpr double kBoxWeight = 1e3;

/// Power-sum differences divided by ℓ·Σ_i i^{ℓ−1}, the size of their gradient.
void scaled_differences(const Eigen::VectorXd& a, const Eigen::VectorXd& b, Eigen::Ref<Eigen::VectorXd> out) {
  const int r = static_cast<int>(a.size());
  for (int l = 1; l < 2 * r; ++l) {
    double pa = 0.0, pb = 0.0, scale = 0.0;
    for (int i = 0; i < r; ++i) {
      pa += std::pow(a(i), l);
      pb += std::pow(b(i), l);
      scale += std::pow(i + 1.0, l - 1);
    }
    out(l - 1) = (pa - pb) / (l * scale);
  }
}

struct Decoded {
  Eigen::VectorXd a;
  Eigen::VectorXd b;
};

Decoded decode(const Eigen::VectorXd& x, int r, PairForm form) {
  Decoded out{Eigen::VectorXd(r), Eigen::VectorXd(r)};
  if (form == PairForm::literal) {
    const Eigen::VectorXd v = x.normalized();
    for (int i = 0; i < r; ++i) {
      out.a(i) = i + 1 + v(i) / 4.0;
      out.b(i) = i + 1 - v(i) / 4.0;
    }
    return out;
  }
  const Eigen::VectorXd u = x.tail(r).normalized();
  for (int i = 0; i < r; ++i) {
    out.a(i) = i + 1 + 0.25 * std::tanh(x(i));
    out.b(i) = out.a(i) + 0.5 * u(i);
  }
  return out;
}

}  // namespace

double power_sum_residual(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  const int r = static_cast<int>(a.size());
  double total = 0.0;
  for (int l = 1; l < 2 * r; ++l) {
    double diff = 0.0;
    for (int i = 0; i < r; ++i) diff += std::pow(a(i), l) - std::pow(b(i), l);
    total += diff * diff;
  }
  return total;
}

double box_violation(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  double v = 0.0;
  for (int i = 0; i < a.size(); ++i) {
    v = std::max(v, std::abs(a(i) - (i + 1)) - 0.25);
    v = std::max(v, std::abs(b(i) - (i + 1)) - 0.25);
  }
  return std::max(v, 0.0);
}

MatchedPair search_matched_pair(int r, const PairSearchConfig& config) {
  if (r < 3) throw DomainError("search_matched_pair: r must be at least 3");
  if (config.restarts < 1) throw DomainError("search_matched_pair: restarts must be at least 1");
  const PairForm form = config.form;
  LsqProblem prob;
  prob.n_params = form == PairForm::literal ? r : 2 * r;
  prob.n_residuals = 2 * r - 1 + (form == PairForm::relaxed ? r : 0);
  prob.residual = [&](const Eigen::VectorXd& x, Eigen::VectorXd& out) {
    const Decoded p = decode(x, r, form);
    scaled_differences(p.a, p.b, out.head(2 * r - 1));
    if (form == PairForm::relaxed)
      for (int i = 0; i < r; ++i) out(2 * r - 1 + i) = kBoxWeight * std::max(0.0, std::abs(p.b(i) - (i + 1)) - 0.25);
  };
  LsqOptions opts;
  opts.max_evaluations = config.max_evaluations;

  MatchedPair best;
  best.r = r;
  best.residual = std::numeric_limits<double>::infinity();
  best.parametrization = form == PairForm::literal ? "literal" : "relaxed";
  for (int k = 0; k < config.restarts; ++k) {
    Stream rng(config.rng_seed, kPairUnit, static_cast<std::uint64_t>(k));
    const LsqResult res = solve_lsq(prob, rng.normal_vector(prob.n_params), opts);
    const Decoded p = decode(res.x, r, form);
    if (box_violation(p.a, p.b) > 1e-12) continue;
    const double resid = power_sum_residual(p.a, p.b);
    if (resid < best.residual) {
      best.residual = resid;
      best.a = p.a;
      best.b = p.b;
    }
  }
  if (best.a.size() == 0) {
    // Every restart left a box; report the literal point with v uniform.
    const Decoded p = decode(Eigen::VectorXd::Ones(r), r, PairForm::literal);
    best.a = p.a;
    best.b = p.b;
    best.residual = power_sum_residual(best.a, best.b);
  }
  best.separation = (best.a - best.b).squaredNorm();
  best.converged = best.residual <= config.tol;
  return best;
}

LBInstance build_networks(const MatchedPair& pair) {
  const int r = pair.r;
  if (pair.a.size() != r || pair.b.size() != r) throw DomainError("build_networks: pair length differs from r");
  const int side = 2 * r + 6;
  Eigen::VectorXd da(side), db(side);
  for (int i = 0; i < r; ++i) {
    da(2 * i) = da(2 * i + 1) = pair.a(i);
    db(2 * i) = db(2 * i + 1) = pair.b(i);
  }
  for (int k = 0; k < 3; ++k) {
    da(2 * r + k) = db(2 * r + k) = 1.0;
    da(2 * r + 3 + k) = db(2 * r + 3 + k) = -1.0;
  }
  return {da.asDiagonal(), db.asDiagonal()};
}

double char_function(const Eigen::VectorXd& c, double t) {
  const double t2 = 4.0 * t * t;
  double v = 1.0 / std::pow(1.0 + t2, 3);
  for (int j = 0; j < c.size(); ++j) v /= 1.0 + t2 * c(j) * c(j);
  return v;
}

CharGap char_gap(const MatchedPair& pair, const std::vector<double>& t_grid) {
  if (t_grid.empty()) throw DomainError("char_gap: empty grid");
  CharGap out;
  for (double t : t_grid) out.sup_gap = std::max(out.sup_gap, std::abs(char_function(pair.a, t) - char_function(pair.b, t)));
  const int r = pair.r;
  double pa = 1.0, pb = 1.0, den = 1.0;
  for (int j = 0; j < r; ++j) {
    pa *= pair.a(j) * pair.a(j);
    pb *= pair.b(j) * pair.b(j);
    const double s = pair.a(j) + pair.b(r - 1 - j);
    den *= s * s;
  }
  out.denominator = den;
  out.denominator_floor = std::pow(static_cast<double>(r), 2.0 * r);
  out.analytic_bound = std::abs(pa - pb) / den;
  return out;
}

std::vector<double> uniform_grid(double lo, double hi, double step) {
  if (!(step > 0.0) || hi < lo) throw DomainError("uniform_grid: need step > 0 and hi >= lo");
  const auto n = static_cast<std::int64_t>(std::floor((hi - lo) / step + 1e-9));
  std::vector<double> g;
  g.reserve(static_cast<size_t>(n + 1));
  for (std::int64_t k = 0; k <= n; ++k) g.push_back(lo + static_cast<double>(k) * step);
  return g;
}

double param_distance_lb(const MatchedPair& pair) {
  // Sorting gives the optimal matching for the convex cost |x − y|.
  std::vector<double> a(pair.a.data(), pair.a.data() + pair.a.size());
  std::vector<double> b(pair.b.data(), pair.b.data() + pair.b.size());
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  double s = 0.0;
  for (size_t j = 0; j < a.size(); ++j) s += std::abs(a[j] - b[j]);
  return 2.0 * s;
}

nlohmann::json lowerbound_fixture(const MatchedPair& pair, const CharGap& gap) {
  nlohmann::json j;
  j["r"] = pair.r;
  j["a"] = vector_to_json(pair.a);
  j["b"] = vector_to_json(pair.b);
  j["residual"] = pair.residual;
  j["sup_gap"] = gap.sup_gap;
  j["analytic_bound"] = gap.analytic_bound;
  j["param_distance"] = param_distance_lb(pair);
  return j;
}

}  // namespace polymom
