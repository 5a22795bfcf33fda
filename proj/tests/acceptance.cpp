// End-to-end acceptance run: one PASS/FAIL line per criterion on stdout,
// per-seed failure notes on stderr. Exit status is the number of failures.

#include <algorithm>
#include <chrono>
#include <cstdarg>
#include <cstdlib>
#include <cmath>
#include <cstdio>
#include <functional>
#include <iostream>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "polymom/error.hpp"
#include "polymom/gauge.hpp"
#include "polymom/lowerbound.hpp"
#include "polymom/lowrank.hpp"
#include "polymom/model.hpp"
#include "polymom/moments.hpp"
#include "polymom/programs.hpp"
#include "polymom/relaxation.hpp"
#include "polymom/rng.hpp"
#include "polymom/tensor.hpp"
#include "polymom/tensor_ring.hpp"

using namespace polymom;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, ...) __attribute__((format(printf, 1, 2)));
std::string fmt(const char* f, ...) {
  char buf[512];
  va_list ap;
  va_start(ap, f);
  std::vsnprintf(buf, sizeof buf, f, ap);
  va_end(ap);
  return buf;
}

void note(int id, const std::string& msg) { std::cerr << "  [" << id << "] " << msg << '\n'; }

PolyNetwork smoothed_quadratic(int r, int d, double rho, std::uint64_t seed) {
  SmoothingParams p;
  p.rho = rho;
  p.base = zero_quadratic(r, d);
  p.rng_seed = seed;
  return smooth_quadratic(p);
}

// E[(x² − 1)^k] for x ~ N(0,1) from the binomial expansion and E x^{2j} = (2j−1)!!.
double centered_square_moment(int k) {
  double s = 0.0;
  for (int j = 0; j <= k; ++j) {
    const double sign = ((k - j) % 2 == 0) ? 1.0 : -1.0;
    s += sign * static_cast<double>(binomial(k, j)) * double_factorial_odd(j);
  }
  return s;
}

Outcome criterion1() {
  const auto t0 = Clock::now();
  const int r = 3, d = 4;
  Stream rng(11, 1);
  std::vector<Eigen::MatrixXd> q;
  for (int a = 0; a < d; ++a) {
    const Eigen::MatrixXd g = rng.normal_matrix(r, r);
    q.push_back(Eigen::MatrixXd::Identity(r, r) + 0.15 * (g + g.transpose()));
  }
  const PolyNetwork net = PolyNetwork::quadratic(q);
  const QuadraticMomentTable exact = exact_quadratic_moments(net);
  const QuadraticMomentTable mc = estimate_quadratic_moments(sample(net, SeedDistribution::gaussian(), 1000000, 12), 0.0, 0.01);
  double worst_s = 0.0, worst_t = 0.0;
  for (int a = 0; a < d; ++a)
    for (int b = 0; b < d; ++b) {
      worst_s = std::max(worst_s, std::abs(mc.S(a, b) - exact.S(a, b)) / std::abs(exact.S(a, b)));
      for (int c = 0; c < d; ++c)
        worst_t = std::max(worst_t, std::abs(mc.T(a, b, c) - exact.T(a, b, c)) / std::abs(exact.T(a, b, c)));
    }
  const double c2 = centered_square_moment(2), c3 = centered_square_moment(3);
  const QuadraticMomentTable one = exact_quadratic_moments(PolyNetwork::quadratic({Eigen::MatrixXd::Constant(1, 1, 1.0)}));
  const bool constants = c2 == 2.0 && c3 == 8.0 && one.S(0, 0) == c2 / 2.0 && one.T(0, 0, 0) == c3 / 8.0;
  const double t = seconds_since(t0);
  return {worst_s <= 0.02 && worst_t <= 0.05 && constants && t < 60.0,
          fmt("max rel err S %.2e (<=2e-2), T %.2e (<=5e-2), r=1 constants %s, %.1f s", worst_s, worst_t,
              constants ? "2 and 8" : "WRONG", t)};
}

// Isserlis: E Π_k ⟨u_k, g⟩ = Σ over perfect matchings Π ⟨u_i, u_j⟩.
double wick(const std::vector<Eigen::VectorXd>& u, std::vector<int>& open) {
  if (open.empty()) return 1.0;
  const int first = open.front();
  double s = 0.0;
  for (size_t k = 1; k < open.size(); ++k) {
    const int partner = open[k];
    std::vector<int> rest;
    for (size_t j = 1; j < open.size(); ++j)
      if (j != k) rest.push_back(open[j]);
    s += u[first].dot(u[partner]) * wick(u, rest);
  }
  return s;
}

Outcome criterion2() {
  const auto t0 = Clock::now();
  double worst = 0.0;
  int pairs = 0;
  for (int k = 0; k < 100; ++k) {
    const int omega = 1 + k % 5;
    const int r = 1 + (k / 5) % 4;
    Stream rng(22, 2, k);
    const Eigen::VectorXd v = rng.normal_vector(r), w = rng.normal_vector(r);
    std::vector<Eigen::VectorXd> u(omega, v);
    u.insert(u.end(), omega, w);
    std::vector<int> open(2 * omega);
    std::iota(open.begin(), open.end(), 0);
    worst = std::max(worst, std::abs(hermite_pair_moment(v, w, omega) - wick(u, open)));
    ++pairs;
  }
  const double t = seconds_since(t0);
  return {worst <= 1e-9 && t < 10.0, fmt("%d pairs, max abs err %.2e (<=1e-9), %.2f s", pairs, worst, t)};
}

// Dense E[g^⊗ω (g^⊗ω)ᵀ] built entry by entry.
Eigen::MatrixXd dense_sigma(int r, int omega) {
  const std::int64_t n = ipow(r, omega);
  Eigen::MatrixXd s(n, n);
  std::vector<int> counts(r);
  for (std::int64_t i = 0; i < n; ++i)
    for (std::int64_t j = 0; j < n; ++j) {
      std::fill(counts.begin(), counts.end(), 0);
      std::int64_t a = i, b = j;
      for (int k = 0; k < omega; ++k) {
        ++counts[a % r];
        ++counts[b % r];
        a /= r;
        b /= r;
      }
      double m = 1.0;
      for (int c : counts) m *= c % 2 ? 0.0 : double_factorial_odd(c / 2);
      s(i, j) = m;
    }
  return s;
}

Outcome criterion3() {
  const auto t0 = Clock::now();
  bool ok = true;
  std::ostringstream os;
  for (auto [r, omega] : std::vector<std::pair<int, int>>{{2, 3}, {3, 3}, {4, 3}, {2, 5}}) {
    const SigmaMatrix s = sigma_matrix(r, omega);
    const double lmin = Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(s.sym).eigenvalues().minCoeff();
    const double lmax = Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(dense_sigma(r, omega)).eigenvalues().maxCoeff();
    const double lo = std::pow(omega, -omega / 2.0);
    const double hi = std::pow(r, omega / 2.0) * double_factorial_odd(omega);
    const bool agree = std::abs(lmax - s.lambda_max_full()) <= 1e-9 * lmax;
    ok = ok && lmin >= lo && lmax <= hi && agree;
    os << fmt("(%d,%d) lmin %.3g>=%.3g lmax %.3g<=%.3g; ", r, omega, lmin, lo, lmax, hi);
  }
  const double t = seconds_since(t0);
  ok = ok && t < 30.0;
  return {ok, os.str() + fmt("%.2f s", t)};
}

struct TRRun {
  int ok = 0;
  double worst = 0.0;
  double max_seconds = 0.0;
};

TRRun tensor_ring_runs(int id, double eta, double threshold) {
  TRRun out;
  for (int seed = 0; seed < 100; ++seed) {
    const PolyNetwork net = smoothed_quadratic(2, 3, 0.5, seed);
    QuadraticMomentTable m = exact_quadratic_moments(net);
    if (eta > 0.0) m = perturb(m, eta, 1000 + seed);
    TRConfig cfg;
    cfg.restarts = 20;
    cfg.rng_seed = seed;
    const auto t0 = Clock::now();
    try {
      const RecoveryReport rep = decompose(m, 2, cfg, &net);
      out.max_seconds = std::max(out.max_seconds, seconds_since(t0));
      const double dg = *rep.gauge_distance;
      out.worst = std::max(out.worst, dg);
      if (dg <= threshold)
        ++out.ok;
      else
        note(id, fmt("seed %d d_G %.3e", seed, dg));
    } catch (const std::exception& e) {
      out.max_seconds = std::max(out.max_seconds, seconds_since(t0));
      note(id, fmt("seed %d %s", seed, e.what()));
    }
  }
  return out;
}

Outcome criterion4() {
  const TRRun run = tensor_ring_runs(4, 0.0, 1e-6);
  return {run.ok >= 95 && run.max_seconds < 2.0,
          fmt("%d/100 seeds d_G<=1e-6 (need 95), slowest seed %.3f s (<2 s)", run.ok, run.max_seconds)};
}

Outcome criterion5() {
  const TRRun run = tensor_ring_runs(5, 1e-4, 1e-2);
  return {run.ok >= 90, fmt("%d/100 seeds d_G<=1e-2 at eta=1e-4 (need 90)", run.ok)};
}

struct SosSeed {
  bool ok = false;
  double residual = 0.0;
  double dist = 0.0;
};

SosSeed sos_seed(int r, int d, std::uint64_t seed) {
  const PolyNetwork net = smoothed_quadratic(r, d, 0.5, seed);
  const QuadraticMomentTable m = exact_quadratic_moments(net);
  const int mm = r * (r + 1) / 2;
  const NonDegenCombo c = find_combo(m.S, r, seed, mm);
  const TensorRingProgram prog = encode_tensor_ring(m.S, m.T, r, c.combo(), tensor_ring_params(m.S, r, 0.0, 4));
  const SolveResult res = solve(prog.program);
  SosSeed out;
  if (!res.feasible()) {
    out.residual = std::numeric_limits<double>::infinity();
    out.dist = std::numeric_limits<double>::infinity();
    return out;
  }
  for (const auto& e : prog.program.equalities) out.residual = std::max(out.residual, std::abs(res.pe(e.p)));
  for (const auto& mat : res.pe.moment_matrices)
    out.residual = std::max(out.residual, -Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(mat).eigenvalues().minCoeff());
  std::vector<Eigen::MatrixXd> q;
  for (int a = 0; a < d; ++a) {
    Eigen::MatrixXd qa(r, r);
    for (int i = 0; i < r; ++i)
      for (int j = 0; j < r; ++j) qa(i, j) = res.pe(prog.q_entry(a, std::min(i, j), std::max(i, j)));
    q.push_back(qa);
  }
  out.dist = gauge_distance(PolyNetwork::quadratic(q), net).distance;
  out.ok = out.residual <= 1e-6 && out.dist <= 1e-3;
  return out;
}

Outcome criterion6() {
  const auto t0 = Clock::now();
  int ok[2] = {0, 0};
  const int shapes[2][2] = {{1, 1}, {2, 3}};
  for (int s = 0; s < 2; ++s) {
    const int r = shapes[s][0], d = shapes[s][1];
    for (int seed = 0; seed < 100; ++seed) {
      try {
        const SosSeed out = sos_seed(r, d, seed);
        if (out.ok)
          ++ok[s];
        else
          note(6, fmt("r=%d d=%d seed %d residual %.2e d_G %.2e", r, d, seed, out.residual, out.dist));
      } catch (const std::exception& e) {
        note(6, fmt("r=%d d=%d seed %d %s", r, d, seed, e.what()));
      }
    }
  }
  return {ok[0] >= 60 && ok[1] >= 60,
          fmt("residual<=1e-6 and d_G<=1e-3: r=1,d=1 %d/100, r=2,d=3 %d/100 (need 60), %.0f s", ok[0], ok[1],
              seconds_since(t0))};
}

Outcome criterion7() {
  int ok = 0;
  double worst = 0.0;
  for (int seed = 0; seed < 50; ++seed) {
    Stream rng(seed, 7);
    std::vector<Eigen::VectorXd> v;
    for (int i = 0; i < 3; ++i) v.push_back(rng.normal_vector(4));
    const PolyNetwork net = diagonal_network(v);
    const QuadraticMomentTable m = exact_quadratic_moments(net);
    TRConfig cfg;
    cfg.diagonal = true;
    cfg.rng_seed = seed;
    try {
      const RecoveryReport rep = decompose(m, 3, cfg);
      const double dg = gauge_distance(rep.recovered, diagonal_network(jennrich_diagonal(m.T, seed))).distance;
      worst = std::max(worst, dg);
      if (dg <= 1e-8)
        ++ok;
      else
        note(7, fmt("seed %d distance %.3e", seed, dg));
    } catch (const std::exception& e) {
      note(7, fmt("seed %d %s", seed, e.what()));
    }
  }
  return {ok == 50, fmt("%d/50 seeds agree to 1e-8 (worst %.2e)", ok, worst)};
}

Outcome criterion8() {
  int ok = 0;
  for (int trial = 0; trial < 60; ++trial) {
    const PolyNetwork net = smoothed_quadratic(2, 3, 0.5, trial);
    const QuadraticMomentTable m = exact_quadratic_moments(net);
    try {
      const NonDegenCombo c = find_combo(m.S, 2, 5000 + trial);
      const Nondegeneracy nd = validate_nondegeneracy(net, c.lambda, c.mu);
      if (std::min(nd.eigengap, nd.min_entry) > 0.0)
        ++ok;
      else
        note(8, fmt("trial %d eigengap %.2e min entry %.2e", trial, nd.eigengap, nd.min_entry));
    } catch (const std::exception& e) {
      note(8, fmt("trial %d %s", trial, e.what()));
    }
  }
  return {ok >= 40, fmt("%d/60 trials with positive measured upsilon (need 40)", ok)};
}

Outcome criterion9() {
  int ok = 0, sign_fail = 0;
  for (int seed = 0; seed < 100; ++seed) {
    SmoothingParams p;
    p.rho = 0.5;
    p.base = zero_lowrank(2, 4, 3, 1);
    p.rng_seed = seed;
    const PolyNetwork net = smooth_componentwise(p);
    const PairMomentTable m = exact_pair_moments(net);
    LRConfig cfg;
    cfg.rng_seed = seed;
    try {
      const RecoveryReport rep = factorize(m, 2, 3, 1, cfg, &net);
      const double dg = *rep.gauge_distance;
      if (dg > 1e-4) {
        note(9, fmt("seed %d d_G %.3e", seed, dg));
        continue;
      }
      ++ok;
      const PolyNetwork fixed = rotate_network(net, lowrank_gauge(net, rep.combo->lambda, rep.combo->mu));
      for (int a = 0; a < net.d; ++a) {
        const Eigen::VectorXd x = rep.recovered.unit(a).values(), y = fixed.unit(a).values();
        for (Eigen::Index i = 0; i < x.size(); ++i)
          if (std::abs(y(i)) > 1e-3 && x(i) * y(i) < 0.0) {
            ++sign_fail;
            note(9, fmt("seed %d unit %d entry %d sign mismatch", seed, a, static_cast<int>(i)));
          }
      }
    } catch (const std::exception& e) {
      note(9, fmt("seed %d %s", seed, e.what()));
    }
  }
  return {ok >= 90 && sign_fail == 0,
          fmt("%d/100 seeds d_G<=1e-4 (need 90), %d sign mismatches on entries >1e-3", ok, sign_fail)};
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  return v[v.size() / 2];
}

Outcome criterion10() {
  const int r = 2, head_d = 3;
  double tail_err = 0.0;
  std::vector<double> total[2], tail_only[2];
  const int sizes[2] = {50, 500};
  for (int k = 0; k < 2; ++k) {
    const int d = sizes[k];
    const PolyNetwork net = smoothed_quadratic(r, d, 0.5, 10);
    Eigen::MatrixXd s(d, d);
    for (int a = 0; a < d; ++a)
      for (int b = 0; b < d; ++b) s(a, b) = (net.Q[a] * net.Q[b]).trace();
    const QuadraticMomentTable head_m =
        exact_quadratic_moments(PolyNetwork::quadratic({net.Q.begin(), net.Q.begin() + head_d}));
    for (int rep = 0; rep < 21; ++rep) {
      const auto t0 = Clock::now();
      TRConfig cfg;
      cfg.rng_seed = 10;
      const RecoveryReport head = decompose(head_m, r, cfg);
      const auto t1 = Clock::now();
      const std::vector<Eigen::MatrixXd> tail = extend_tail(s, head.recovered.Q, d);
      const auto t2 = Clock::now();
      total[k].push_back(std::chrono::duration<double>(t2 - t0).count());
      tail_only[k].push_back(std::chrono::duration<double>(t2 - t1).count());
      if (rep == 0 && d == 50) {
        std::vector<Eigen::MatrixXd> full = head.recovered.Q;
        full.insert(full.end(), tail.begin(), tail.end());
        tail_err = gauge_distance(PolyNetwork::quadratic(full), net).distance;
      }
    }
  }
  const double ratio = median(total[1]) / median(total[0]);
  const double tail_ratio = median(tail_only[1]) / median(tail_only[0]);
  return {tail_err <= 1e-9 && ratio >= 8.0 && ratio <= 12.0,
          fmt("d=50 full-network d_G %.2e (<=1e-9); total runtime ratio d=500/d=50 %.2f (need 8-12), "
              "tail stage alone %.2f, medians %.3g ms / %.3g ms",
              tail_err, ratio, tail_ratio, 1e3 * median(total[0]), 1e3 * median(total[1]))};
}

Outcome criterion11() {
  const auto t0 = Clock::now();
  bool ok = true;
  std::ostringstream os;
  double prev_log_gap = std::numeric_limits<double>::infinity();
  const std::vector<double> grid = uniform_grid(0.0, 50.0, 1e-3);
  for (int r = 4; r <= 8; ++r) {
    MatchedPair best;
    best.residual = std::numeric_limits<double>::infinity();
    for (PairForm form : {PairForm::relaxed, PairForm::literal}) {
      PairSearchConfig cfg;
      cfg.form = form;
      cfg.rng_seed = static_cast<std::uint64_t>(r);
      const MatchedPair p = search_matched_pair(r, cfg);
      if (p.residual < best.residual) best = p;
    }
    const LBInstance inst = build_networks(best);
    const QuadraticMomentTable m1 = exact_quadratic_moments(inst.network1());
    const QuadraticMomentTable m2 = exact_quadratic_moments(inst.network2());
    const double moment_gap = std::max({std::abs(m1.mu(0) - m2.mu(0)), std::abs(m1.S(0, 0) - m2.S(0, 0)),
                                        std::abs(m1.T(0, 0, 0) - m2.T(0, 0, 0))});
    const double log_gap = std::log(char_gap(best, grid).sup_gap);
    const double dist = param_distance_lb(best);
    const bool row = best.residual <= 1e-10 && moment_gap <= 1e-8 && log_gap < prev_log_gap && dist >= 1.0;
    if (!row) ok = false;
    os << fmt("r=%d res %.1e mom %.1e log-gap %.2f dist %.2f %s; ", r, best.residual, moment_gap, log_gap, dist,
              best.parametrization.c_str());
    prev_log_gap = log_gap;
  }
  return {ok, os.str() + fmt("%.0f s", seconds_since(t0))};
}

// Joint cumulant of the listed coordinates via Σ_π (|π|−1)! (−1)^{|π|−1} Π_B E[Π_{a∈B} z_a].
double raw_moment(const std::vector<Eigen::VectorXd>& v, const std::vector<int>& units) {
  const int r = static_cast<int>(v.size());
  const int k = static_cast<int>(units.size());
  double s = 0.0;
  std::vector<int> idx(k, 0);
  for (std::int64_t code = 0; code < ipow(r, k); ++code) {
    std::int64_t c = code;
    std::vector<int> counts(r, 0);
    double coef = 1.0;
    for (int j = 0; j < k; ++j) {
      const int i = static_cast<int>(c % r);
      c /= r;
      ++counts[i];
      coef *= v[i](units[j]);
    }
    double e = 1.0;
    for (int cnt : counts) e *= double_factorial_odd(cnt);
    s += coef * e;
  }
  return s;
}

void set_partitions(int n, std::vector<int>& label, int next, int max_label,
                    const std::function<void(const std::vector<int>&, int)>& visit) {
  if (next == n) {
    visit(label, max_label + 1);
    return;
  }
  for (int b = 0; b <= max_label + 1; ++b) {
    label[next] = b;
    set_partitions(n, label, next + 1, std::max(max_label, b), visit);
  }
}

double partition_cumulant(const std::vector<Eigen::VectorXd>& v, const std::vector<int>& units) {
  const int n = static_cast<int>(units.size());
  double s = 0.0;
  std::vector<int> label(n, 0);
  label[0] = 0;
  set_partitions(n, label, 1, 0, [&](const std::vector<int>& lab, int blocks) {
    double prod = 1.0;
    for (int b = 0; b < blocks; ++b) {
      std::vector<int> sub;
      for (int j = 0; j < n; ++j)
        if (lab[j] == b) sub.push_back(units[j]);
      prod *= raw_moment(v, sub);
    }
    s += ((blocks - 1) % 2 ? -1.0 : 1.0) * factorial(blocks - 1) * prod;
  });
  return s;
}

Outcome criterion12() {
  double worst = 0.0;
  int checked = 0;
  for (int d = 1; d <= 3; ++d) {
    Stream rng(12, 12, d);
    std::vector<Eigen::VectorXd> v;
    for (int i = 0; i < 3; ++i) v.push_back(rng.normal_vector(d));
    for (int total = 1; total <= 3; ++total) {
      // Every β with |β| = total as a nondecreasing unit list.
      std::vector<int> units(total, 0);
      while (true) {
        std::vector<int> beta(d, 0);
        for (int a : units) ++beta[a];
        worst = std::max(worst, std::abs(cumulant_diagonal(v, beta) - partition_cumulant(v, units)));
        ++checked;
        int pos = total - 1;
        while (pos >= 0 && units[pos] == d - 1) --pos;
        if (pos < 0) break;
        ++units[pos];
        for (int j = pos + 1; j < total; ++j) units[j] = units[pos];
      }
    }
  }
  return {worst <= 1e-9, fmt("%d multi-indices, max abs err %.2e (<=1e-9)", checked, worst)};
}

}  // namespace

int main(int argc, char** argv) {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
      {"moment identities", criterion1},        {"hermite identity", criterion2},
      {"sigma spectra", criterion3},            {"tensor ring noiseless", criterion4},
      {"tensor ring noisy", criterion5},        {"relaxation backend", criterion6},
      {"diagonal equivalence", criterion7},     {"find combo", criterion8},
      {"low-rank recovery", criterion9},        {"linear in d", criterion10},
      {"lower-bound lab", criterion11},         {"cumulants", criterion12},
  };
  std::vector<size_t> chosen;
  for (int i = 1; i < argc; ++i) chosen.push_back(static_cast<size_t>(std::atoi(argv[i])));
  int failures = 0;
  for (size_t k = 0; k < criteria.size(); ++k) {
    if (!chosen.empty() && std::find(chosen.begin(), chosen.end(), k + 1) == chosen.end()) continue;
    Outcome o;
    try {
      o = criteria[k].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    if (!o.pass) ++failures;
    std::cout << (o.pass ? "PASS" : "FAIL") << " criterion " << (k + 1) << " (" << criteria[k].first
              << "): " << o.detail << std::endl;
  }
  return failures;
}
