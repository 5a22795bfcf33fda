#include <chrono>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <limits>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>
#include <openssl/evp.h>

#include "polymom/error.hpp"
#include "polymom/gauge.hpp"
#include "polymom/io.hpp"
#include "polymom/lowerbound.hpp"
#include "polymom/lowrank.hpp"
#include "polymom/model.hpp"
#include "polymom/moments.hpp"
#include "polymom/network.hpp"
#include "polymom/tensor_ring.hpp"
#include "polymom/version.hpp"

using nlohmann::json;
using namespace polymom;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitFailure = 1;
constexpr int kExitUsage = 2;
constexpr int kExitConvergence = 3;
constexpr int kExitDegeneracy = 4;
constexpr int kExitResource = 5;

constexpr int kComboAttempts = 5;

std::string sha256_hex(const std::string& bytes) {
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), md, &len, EVP_sha256(), nullptr) != 1)
    throw std::runtime_error("sha256 failed");
  std::ostringstream os;
  for (unsigned int i = 0; i < len; ++i) os << std::hex << std::setw(2) << std::setfill('0') << static_cast<int>(md[i]);
  return os.str();
}

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw SchemaError("cannot open '" + path + "'");
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

std::string dump(const json& j) { return j.dump(2) + "\n"; }

/// Everything a command reads and writes, recorded for the manifest.
struct Run {
  std::map<std::string, std::string> inputs;
  std::map<std::string, std::string> outputs;
  bool write = true;

  std::string read(const std::string& path) {
    std::string bytes = slurp(path);
    inputs[path] = sha256_hex(bytes);
    return bytes;
  }

  json read_json(const std::string& path) {
    const std::string bytes = read(path);
    try {
      return json::parse(bytes);
    } catch (const json::parse_error& e) {
      throw SchemaError(path + ": " + e.what());
    }
  }

  PolyNetwork read_network(const std::string& path) {
    try {
      return network_from_json(read_json(path));
    } catch (const SchemaError& e) {
      const std::string msg = e.what();
      if (msg.rfind(path, 0) == 0) throw;
      throw SchemaError(path + ": " + msg);
    }
  }

  /// Writes to `path`, or stdout for "" / "-".
  void emit(const std::string& path, const std::string& text) {
    const std::string key = path.empty() ? "-" : path;
    outputs[key] = sha256_hex(text);
    if (!write) return;
    if (key == "-") {
      std::cout << text << std::flush;
      return;
    }
    std::ofstream out(path, std::ios::binary);
    if (!out) throw SchemaError("cannot write '" + path + "'");
    out << text;
  }
};

SeedDistribution make_law(const std::string& law, double radius) {
  if (law == "gaussian") return SeedDistribution::gaussian();
  if (law == "sphere") return SeedDistribution::sphere(radius);
  throw DomainError("seed law must be gaussian or sphere");
}

SigmaMode parse_sigma(const std::string& s) {
  if (s == "gaussian") return SigmaMode::gaussian;
  if (s == "identity") return SigmaMode::identity;
  throw DomainError("--sigma must be gaussian or identity");
}

double upsilon(const Nondegeneracy& nd) { return std::min(nd.eigengap, nd.min_entry); }

std::uint64_t attempt_seed(std::uint64_t seed, int k) {
  return k == 0 ? seed : seed ^ (0x9e3779b97f4a7c15ULL * static_cast<std::uint64_t>(k));
}

json report_json(const RecoveryReport& rep) {
  json j;
  j["network"] = network_to_json(rep.recovered);
  j["s_residual"] = rep.s_residual;
  j["t_residual"] = rep.t_residual;
  j["backend"] = rep.backend;
  j["iterations"] = rep.iterations;
  j["restarts_used"] = rep.restarts_used;
  if (rep.gauge_distance) j["gauge_distance"] = *rep.gauge_distance;
  if (rep.combo) {
    json c;
    c["lambda"] = vector_to_json(rep.combo->lambda);
    c["mu"] = vector_to_json(rep.combo->mu);
    if (rep.combo->eigengap) c["eigengap"] = *rep.combo->eigengap;
    if (rep.combo->min_entry) c["min_entry"] = *rep.combo->min_entry;
    j["combo"] = std::move(c);
  }
  if (!rep.message.empty()) j["message"] = rep.message;
  return j;
}

/// Retries with fresh combination weights, keeping the best measured υ.
template <class Attempt, class Measure>
RecoveryReport with_combo_retries(std::uint64_t seed, double min_upsilon, Attempt attempt, Measure measure,
                                  int* attempts_used) {
  std::optional<RecoveryReport> best;
  double best_u = -std::numeric_limits<double>::infinity();
  std::string last_error;
  int k = 0;
  for (; k < kComboAttempts; ++k) {
    try {
      RecoveryReport rep = attempt(attempt_seed(seed, k));
      const double u = measure(rep);
      if (u > best_u) {
        best_u = u;
        best = std::move(rep);
      }
      if (u > min_upsilon) break;
    } catch (const DegeneracyError& e) {
      last_error = e.what();
    }
  }
  *attempts_used = std::min(k + 1, kComboAttempts);
  if (!best) throw DegeneracyError("no usable combination after " + std::to_string(kComboAttempts) + " attempts: " + last_error);
  return std::move(*best);
}

struct Options {
  // shared
  std::string out, manifest, backend = "local", sigma = "gaussian", law = "gaussian";
  std::uint64_t seed = 0;
  int r = 2, d = 3, omega = 3, ell = 1, degree = 4, restarts = 20;
  double tol = 1e-9, rho = 0.0, radius = 1.0;
  // generate
  std::string kind = "quadratic", base;
  // sample
  std::string net;
  std::int64_t n = 1000;
  // moments
  std::string samples;
  bool exact = false;
  double eta = 0.0, delta = 0.01, noise = 0.0;
  // solve
  std::string moments, truth;
  bool diagonal = false;
  double min_upsilon = 1e-6;
  int stage2_degree = 6, max_iter = 50000;
  // eval
  std::string a, b;
  // lowerbound
  std::string form = "relaxed";
  double grid_max = 50.0, grid_step = 1e-3;
  // bench
  std::vector<int> rs{2}, ds{3};
  std::vector<double> rhos{0.5}, etas{0.0};
  std::vector<std::int64_t> ns{0};
  int seeds = 1;
};

int cmd_generate(const Options& o, Run& run) {
  SmoothingParams p;
  p.rho = o.rho;
  p.rng_seed = o.seed;
  PolyNetwork out;
  if (o.kind == "quadratic") {
    p.base = o.base.empty() ? zero_quadratic(o.r, o.d) : run.read_network(o.base);
    out = smooth_quadratic(p);
  } else if (o.kind == "lowrank") {
    p.base = o.base.empty() ? zero_lowrank(o.r, o.d, o.omega, o.ell) : run.read_network(o.base);
    out = smooth_componentwise(p);
  } else {
    throw DomainError("--kind must be quadratic or lowrank");
  }
  run.emit(o.out, dump(network_to_json(out)));
  return kExitOk;
}

int cmd_sample(const Options& o, Run& run) {
  const PolyNetwork net = run.read_network(o.net);
  const Eigen::MatrixXd z = sample(net, make_law(o.law, o.radius), o.n, o.seed);
  std::ostringstream os;
  write_samples_csv(os, z);
  run.emit(o.out, os.str());
  return kExitOk;
}

int cmd_moments(const Options& o, Run& run) {
  if (o.exact == !o.samples.empty()) throw DomainError("give exactly one of --samples or --exact --net");
  json j;
  if (o.exact) {
    const PolyNetwork net = run.read_network(o.net);
    if (o.kind == "quadratic") {
      QuadraticMomentTable m = exact_quadratic_moments(net);
      if (o.noise > 0.0) m = perturb(m, o.noise, o.seed);
      j = moments_to_json(m);
    } else if (o.kind == "pair") {
      PairMomentTable m = exact_pair_moments(net, parse_sigma(o.sigma), make_law(o.law, o.radius));
      if (o.noise > 0.0) m = perturb(m, o.noise, o.seed);
      j = moments_to_json(m);
    } else {
      throw DomainError("--kind must be quadratic or pair");
    }
  } else {
    std::istringstream is(run.read(o.samples));
    Eigen::MatrixXd z;
    try {
      z = read_samples_csv(is);
    } catch (const SchemaError& e) {
      throw SchemaError(o.samples + ": " + e.what());
    }
    if (o.kind == "quadratic")
      j = moments_to_json(estimate_quadratic_moments(z, o.eta, o.delta));
    else if (o.kind == "pair")
      j = moments_to_json(estimate_pair_moments(z, o.eta, o.delta));
    else
      throw DomainError("--kind must be quadratic or pair");
  }
  run.emit(o.out, dump(j));
  return kExitOk;
}

TRConfig tr_config(const Options& o) {
  TRConfig cfg;
  cfg.backend = parse_backend(o.backend);
  cfg.degree = o.degree;
  cfg.restarts = o.restarts;
  cfg.tol = o.tol;
  cfg.rng_seed = o.seed;
  cfg.diagonal = o.diagonal;
  cfg.solver.max_iter = o.max_iter;
  return cfg;
}

LRConfig lr_config(const Options& o) {
  LRConfig cfg;
  cfg.backend = parse_backend(o.backend);
  cfg.stage1_degree = o.degree;
  cfg.stage2_degree = o.stage2_degree;
  cfg.restarts = o.restarts;
  cfg.tol = o.tol;
  cfg.rng_seed = o.seed;
  cfg.sigma = parse_sigma(o.sigma);
  cfg.seed = make_law(o.law, o.radius);
  cfg.solver.max_iter = o.max_iter;
  return cfg;
}

RecoveryReport solve_tr(const QuadraticMomentTable& m, const Options& o, const PolyNetwork* truth, int* attempts) {
  const TRConfig base = tr_config(o);
  const int r = o.r;
  const int rank = r * (r + 1) / 2;
  if (base.diagonal) {
    *attempts = 1;
    return decompose(m, r, base, truth);
  }
  return with_combo_retries(
      o.seed, o.min_upsilon,
      [&](std::uint64_t s) {
        TRConfig cfg = base;
        const NonDegenCombo c = find_combo(m.S, r, s, rank);
        cfg.combo = c.combo();
        return decompose(m, r, cfg, truth);
      },
      [&](const RecoveryReport& rep) {
        return upsilon(validate_nondegeneracy(rep.recovered, rep.combo->lambda, rep.combo->mu));
      },
      attempts);
}

RecoveryReport solve_lr(const PairMomentTable& m, const Options& o, const PolyNetwork* truth, int* attempts) {
  const LRConfig base = lr_config(o);
  return with_combo_retries(
      o.seed, o.min_upsilon,
      [&](std::uint64_t s) {
        LRConfig cfg = base;
        cfg.rng_seed = s;
        return factorize(m, o.r, o.omega, o.ell, cfg, truth);
      },
      [&](const RecoveryReport& rep) {
        return upsilon(validate_nondegeneracy(f_network(rep.recovered), rep.combo->lambda, rep.combo->mu));
      },
      attempts);
}

int cmd_solve_tr(const Options& o, Run& run) {
  const QuadraticMomentTable m = quadratic_moments_from_json(run.read_json(o.moments));
  std::optional<PolyNetwork> truth;
  if (!o.truth.empty()) truth = run.read_network(o.truth);
  int attempts = 0;
  const RecoveryReport rep = solve_tr(m, o, truth ? &*truth : nullptr, &attempts);
  json j = report_json(rep);
  j["combo_attempts"] = attempts;
  run.emit(o.out, dump(j));
  return kExitOk;
}

int cmd_solve_lr(const Options& o, Run& run) {
  const PairMomentTable m = pair_moments_from_json(run.read_json(o.moments));
  std::optional<PolyNetwork> truth;
  if (!o.truth.empty()) truth = run.read_network(o.truth);
  int attempts = 0;
  const RecoveryReport rep = solve_lr(m, o, truth ? &*truth : nullptr, &attempts);
  json j = report_json(rep);
  j["combo_attempts"] = attempts;
  run.emit(o.out, dump(j));
  return kExitOk;
}

/// Accepts a bare network or a solver report holding one under "network".
PolyNetwork network_or_report(Run& run, const std::string& path) {
  const json j = run.read_json(path);
  try {
    return network_from_json(j.contains("network") ? j.at("network") : j);
  } catch (const SchemaError& e) {
    throw SchemaError(path + ": " + e.what());
  }
}

int cmd_eval(const Options& o, Run& run) {
  const PolyNetwork a = network_or_report(run, o.a);
  const PolyNetwork b = network_or_report(run, o.b);
  AlignConfig ac;
  ac.rng_seed = o.seed;
  const Alignment al = gauge_distance(a, b, ac);
  json j;
  j["gauge_distance"] = al.distance;
  j["w1_upper_bound"] = w1_upper_bound(al.distance, a.r, a.d, a.omega, make_law(o.law, o.radius));
  j["rotation"] = matrix_to_json(al.rotation.matrix());
  run.emit(o.out, dump(j));
  return kExitOk;
}

json optional_json(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

int cmd_verify(const Options& o, Run& run) {
  const PolyNetwork net = run.read_network(o.net);
  json j;
  if (net.kind == NetworkKind::quadratic) {
    const AssumptionReportTR rep = verify_assumption_tr(net);
    j["m"] = rep.m;
    j["radius"] = rep.radius;
    j["sigma_m"] = rep.sigma_m;
    j["predicted_kappa"] = optional_json(rep.predicted_kappa);
    j["flag"] = rep.flag ? json(*rep.flag) : json(nullptr);
    j["warnings"] = rep.warnings;
  } else {
    const AssumptionReportLR rep = verify_assumption_lr(net);
    j["radius"] = rep.radius;
    j["sigma_min_m"] = rep.sigma_min_m;
    j["sigma_min_h"] = rep.sigma_min_h;
    j["sigma_min_k"] = optional_json(rep.sigma_min_k);
    j["k_order"] = rep.k_order;
    j["k_cols"] = rep.k_cols;
    j["predicted_psi"] = optional_json(rep.predicted_psi);
    j["flag"] = rep.flag ? json(*rep.flag) : json(nullptr);
    j["warnings"] = rep.warnings;
  }
  run.emit(o.out, dump(j));
  return kExitOk;
}

int cmd_lowerbound(const Options& o, Run& run) {
  PairSearchConfig cfg;
  cfg.restarts = o.restarts;
  cfg.tol = o.tol;
  cfg.rng_seed = o.seed;
  if (o.form == "relaxed")
    cfg.form = PairForm::relaxed;
  else if (o.form == "literal")
    cfg.form = PairForm::literal;
  else
    throw DomainError("--form must be relaxed or literal");
  const MatchedPair pair = search_matched_pair(o.r, cfg);
  const CharGap gap = char_gap(pair, uniform_grid(-o.grid_max, o.grid_max, o.grid_step));
  json j = lowerbound_fixture(pair, gap);
  j["separation"] = pair.separation;
  j["converged"] = pair.converged;
  j["parametrization"] = pair.parametrization;
  j["denominator"] = gap.denominator;
  j["denominator_floor"] = gap.denominator_floor;
  run.emit(o.out, dump(j));
  return kExitOk;
}

std::string fmt17(double x) {
  std::ostringstream os;
  os << std::setprecision(17) << x;
  return os.str();
}

int cmd_bench(const Options& o, Run& run) {
  const bool tr = o.kind == "quadratic";
  if (!tr && o.kind != "lowrank") throw DomainError("--kind must be quadratic or lowrank");
  std::ostringstream os;
  os << "# polymom-bench v1\n";
  os << "r,d,omega,ell,rho,eta,n,backend,seed,gauge_dist,residual,wall_ms\n";
  const int omega = tr ? 2 : o.omega;
  const int ell = tr ? 0 : o.ell;
  for (int r : o.rs)
    for (int d : o.ds)
      for (double rho : o.rhos)
        for (double eta : o.etas)
          for (std::int64_t n : o.ns)
            for (int k = 0; k < o.seeds; ++k) {
              const std::uint64_t seed = o.seed + static_cast<std::uint64_t>(k);
              Options so = o;
              so.r = r;
              so.seed = seed;
              double dist = std::numeric_limits<double>::quiet_NaN();
              double resid = std::numeric_limits<double>::quiet_NaN();
              const auto t0 = std::chrono::steady_clock::now();
              try {
                SmoothingParams p;
                p.rho = rho;
                p.rng_seed = seed;
                int attempts = 0;
                if (tr) {
                  p.base = zero_quadratic(r, d);
                  const PolyNetwork truth = smooth_quadratic(p);
                  QuadraticMomentTable m =
                      n > 0 ? estimate_quadratic_moments(sample(truth, SeedDistribution::gaussian(), n, seed + 1), 0.0, o.delta)
                            : exact_quadratic_moments(truth);
                  if (eta > 0.0) m = perturb(m, eta, seed + 2);
                  const RecoveryReport rep = solve_tr(m, so, &truth, &attempts);
                  dist = rep.gauge_distance.value_or(dist);
                  resid = std::max(rep.s_residual, rep.t_residual);
                } else {
                  p.base = zero_lowrank(r, d, omega, ell);
                  const PolyNetwork truth = smooth_componentwise(p);
                  PairMomentTable m =
                      n > 0 ? estimate_pair_moments(sample(truth, SeedDistribution::gaussian(), n, seed + 1), 0.0, o.delta)
                            : exact_pair_moments(truth, parse_sigma(o.sigma));
                  if (eta > 0.0) m = perturb(m, eta, seed + 2);
                  const RecoveryReport rep = solve_lr(m, so, &truth, &attempts);
                  dist = rep.gauge_distance.value_or(dist);
                  resid = rep.s_residual;
                }
              } catch (const ConvergenceError&) {
              } catch (const DegeneracyError&) {
              } catch (const ResourceError&) {
              }
              const double ms =
                  std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
              os << r << ',' << d << ',' << omega << ',' << ell << ',' << fmt17(rho) << ',' << fmt17(eta) << ',' << n
                 << ',' << o.backend << ',' << seed << ',' << fmt17(dist) << ',' << fmt17(resid) << ','
                 << fmt17(ms) << '\n';
            }
  run.emit(o.out, os.str());
  return kExitOk;
}

json options_json(const CLI::App* sub) {
  json flags = json::object();
  for (const CLI::Option* opt : sub->get_options()) {
    if (opt->get_name() == "--help" || opt->count() == 0) continue;
    const auto& res = opt->results();
    flags[opt->get_name()] = res.size() == 1 ? json(res.front()) : json(res);
  }
  return flags;
}

json build_manifest(const std::string& command, const CLI::App* sub, const std::vector<std::string>& args,
                    const Options& o, const Run& run) {
  json m;
  m["format"] = "polymom-manifest v1";
  m["version"] = kVersion;
  m["command"] = command;
  m["argv"] = args;
  m["flags"] = options_json(sub);
  m["seed"] = o.seed;
  m["inputs"] = run.inputs;
  m["outputs"] = run.outputs;
  return m;
}

int exit_for(const std::exception& e) {
  std::cerr << "polymom: " << e.what() << '\n';
  if (dynamic_cast<const ConvergenceError*>(&e)) return kExitConvergence;
  if (dynamic_cast<const DegeneracyError*>(&e)) return kExitDegeneracy;
  if (dynamic_cast<const ResourceError*>(&e)) return kExitResource;
  if (dynamic_cast<const DomainError*>(&e) || dynamic_cast<const ConfigurationError*>(&e)) return kExitUsage;
  if (dynamic_cast<const std::bad_alloc*>(&e)) return kExitResource;
  return kExitFailure;
}

int run_command(const std::vector<std::string>& args, Run& run, json* manifest_out);

int cmd_replay(const std::string& path) {
  Run outer;
  const json m = outer.read_json(path);
  if (!m.contains("argv") || !m.contains("outputs")) throw SchemaError(path + ": missing 'argv' or 'outputs'");
  if (m.value("version", "") != kVersion)
    std::cerr << "polymom: manifest version " << m.value("version", "?") << " differs from " << kVersion << '\n';
  Run inner;
  inner.write = false;
  json unused;
  const int code = run_command(m.at("argv").get<std::vector<std::string>>(), inner, &unused);
  if (code != kExitOk) return code;
  if (m.contains("inputs") && m.at("inputs").get<std::map<std::string, std::string>>() != inner.inputs)
    std::cerr << "polymom: input digests differ from the manifest\n";
  const auto want = m.at("outputs").get<std::map<std::string, std::string>>();
  bool same = want == inner.outputs;
  for (const auto& [file, digest] : want) {
    auto it = inner.outputs.find(file);
    const bool ok = it != inner.outputs.end() && it->second == digest;
    std::cout << (ok ? "same " : "DIFF ") << file << '\n';
  }
  return same ? kExitOk : kExitFailure;
}

int run_command(const std::vector<std::string>& args, Run& run, json* manifest_out) {
  CLI::App app{"Learning polynomial transformations by the method of moments", "polymom"};
  app.set_version_flag("--version", std::string(kVersion));
  app.require_subcommand(1);
  Options o;
  std::string replay_path;

  auto common = [&](CLI::App* s) {
    s->add_option("--out,-o", o.out, "Output file (stdout when omitted)");
    s->add_option("--manifest", o.manifest, "Manifest path (default <out>.manifest.json)");
    s->add_option("--seed", o.seed, "RNG seed");
  };
  auto law = [&](CLI::App* s) {
    s->add_option("--law", o.law, "Seed law")->check(CLI::IsMember({"gaussian", "sphere"}));
    s->add_option("--radius", o.radius, "Sphere radius for --law sphere");
  };
  auto solver = [&](CLI::App* s) {
    s->add_option("--backend", o.backend, "Solver backend")->check(CLI::IsMember({"sos", "local", "hybrid"}));
    s->add_option("--degree", o.degree, "Relaxation degree (stage 1 for low-rank)");
    s->add_option("--restarts", o.restarts, "Random restarts of the local fit");
    s->add_option("--tol", o.tol, "Residual tolerance");
    s->add_option("--max-iter", o.max_iter, "Relaxation solver iteration cap");
    s->add_option("--min-upsilon", o.min_upsilon, "Accept a combination once its measured non-degeneracy exceeds this");
  };

  CLI::App* gen = app.add_subcommand("generate", "Write a smoothed network");
  common(gen);
  gen->add_option("--kind", o.kind, "quadratic or lowrank")->check(CLI::IsMember({"quadratic", "lowrank"}));
  gen->add_option("--r", o.r, "Seed dimension")->check(CLI::PositiveNumber);
  gen->add_option("--d", o.d, "Number of units")->check(CLI::PositiveNumber);
  gen->add_option("--omega", o.omega, "Tensor order (lowrank)")->check(CLI::PositiveNumber);
  gen->add_option("--ell", o.ell, "Components per unit (lowrank)")->check(CLI::PositiveNumber);
  gen->add_option("--rho", o.rho, "Smoothing magnitude")->check(CLI::NonNegativeNumber);
  gen->add_option("--base", o.base, "Base network file (zeros when omitted)");

  CLI::App* smp = app.add_subcommand("sample", "Draw samples from a network as CSV");
  common(smp);
  law(smp);
  smp->add_option("--net", o.net, "Network file")->required();
  smp->add_option("--n", o.n, "Number of samples")->check(CLI::PositiveNumber);

  CLI::App* mom = app.add_subcommand("moments", "Estimate or compute moment tables");
  common(mom);
  law(mom);
  mom->add_option("--kind", o.kind, "quadratic or pair")->check(CLI::IsMember({"quadratic", "pair"}));
  mom->add_option("--samples", o.samples, "Samples CSV");
  mom->add_flag("--exact", o.exact, "Exact moments of --net");
  mom->add_option("--net", o.net, "Network file for --exact");
  mom->add_option("--noise", o.noise, "Uniform entrywise perturbation added to exact moments")->check(CLI::NonNegativeNumber);
  mom->add_option("--eta", o.eta, "Target accuracy recorded with estimated moments")->check(CLI::NonNegativeNumber);
  mom->add_option("--delta", o.delta, "Failure probability recorded with estimated moments");
  mom->add_option("--sigma", o.sigma, "Inner product for exact pair moments")->check(CLI::IsMember({"gaussian", "identity"}));

  CLI::App* str = app.add_subcommand("solve_tr", "Tensor ring decomposition from quadratic moments");
  common(str);
  solver(str);
  str->add_option("--moments", o.moments, "Quadratic moments file")->required();
  str->add_option("--r", o.r, "Seed dimension")->required()->check(CLI::PositiveNumber);
  str->add_option("--truth", o.truth, "Ground-truth network for reporting d_G");
  str->add_flag("--diagonal", o.diagonal, "Restrict units to diagonal matrices");

  CLI::App* slr = app.add_subcommand("solve_lr", "Low-rank factorization from pair moments");
  common(slr);
  solver(slr);
  law(slr);
  slr->add_option("--moments", o.moments, "Pair moments file")->required();
  slr->add_option("--r", o.r, "Seed dimension")->required()->check(CLI::PositiveNumber);
  slr->add_option("--omega", o.omega, "Tensor order")->required()->check(CLI::PositiveNumber);
  slr->add_option("--ell", o.ell, "Components per unit")->required()->check(CLI::PositiveNumber);
  slr->add_option("--stage2-degree", o.stage2_degree, "Second-stage relaxation degree");
  slr->add_option("--sigma", o.sigma, "Inner product behind the moments")->check(CLI::IsMember({"gaussian", "identity"}));
  slr->add_option("--truth", o.truth, "Ground-truth network for reporting d_G");

  CLI::App* ev = app.add_subcommand("eval", "Gauge distance and W1 bound between two networks");
  common(ev);
  law(ev);
  ev->add_option("--a", o.a, "First network or solver report")->required();
  ev->add_option("--b", o.b, "Second network or solver report")->required();

  CLI::App* ver = app.add_subcommand("verify", "Check the smoothed-instance assumption on a network");
  common(ver);
  ver->add_option("--net", o.net, "Network file")->required();

  CLI::App* lb = app.add_subcommand("lowerbound", "Matched-pair search and characteristic-function gap");
  common(lb);
  lb->add_option("--r", o.r, "Pair length (>= 3)")->check(CLI::Range(3, 64));
  lb->add_option("--restarts", o.restarts, "Random restarts");
  lb->add_option("--tol", o.tol, "Residual tolerance");
  lb->add_option("--form", o.form, "relaxed or literal")->check(CLI::IsMember({"relaxed", "literal"}));
  lb->add_option("--grid-max", o.grid_max, "Grid half-width for the gap")->check(CLI::PositiveNumber);
  lb->add_option("--grid-step", o.grid_step, "Grid step for the gap")->check(CLI::PositiveNumber);

  CLI::App* bn = app.add_subcommand("bench", "Sweep (r, d, rho, eta, n) and report d_G and runtime");
  common(bn);
  solver(bn);
  bn->add_option("--kind", o.kind, "quadratic or lowrank")->check(CLI::IsMember({"quadratic", "lowrank"}));
  bn->add_option("--r", o.rs, "Seed dimensions")->delimiter(',');
  bn->add_option("--d", o.ds, "Unit counts")->delimiter(',');
  bn->add_option("--rho", o.rhos, "Smoothing magnitudes")->delimiter(',');
  bn->add_option("--eta", o.etas, "Moment perturbations")->delimiter(',');
  bn->add_option("--n", o.ns, "Sample sizes (0 = exact moments)")->delimiter(',');
  bn->add_option("--omega", o.omega, "Tensor order (lowrank)");
  bn->add_option("--ell", o.ell, "Components per unit (lowrank)");
  bn->add_option("--sigma", o.sigma, "Inner product (lowrank)")->check(CLI::IsMember({"gaussian", "identity"}));
  bn->add_option("--seeds", o.seeds, "Seeds per grid point")->check(CLI::PositiveNumber);

  CLI::App* rp = app.add_subcommand("replay", "Re-run a manifest and compare output digests");
  rp->add_option("manifest", replay_path, "Manifest file")->required();

  try {
    std::vector<std::string> rev(args.rbegin(), args.rend());
    app.parse(rev);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }

  CLI::App* sub = app.get_subcommands().front();
  const std::string name = sub->get_name();
  if (name == "replay") return cmd_replay(replay_path);

  int code = kExitOk;
  if (name == "generate")
    code = cmd_generate(o, run);
  else if (name == "sample")
    code = cmd_sample(o, run);
  else if (name == "moments")
    code = cmd_moments(o, run);
  else if (name == "solve_tr")
    code = cmd_solve_tr(o, run);
  else if (name == "solve_lr")
    code = cmd_solve_lr(o, run);
  else if (name == "eval")
    code = cmd_eval(o, run);
  else if (name == "verify")
    code = cmd_verify(o, run);
  else if (name == "lowerbound")
    code = cmd_lowerbound(o, run);
  else if (name == "bench")
    code = cmd_bench(o, run);

  const json manifest = build_manifest(name, sub, args, o, run);
  *manifest_out = manifest;
  if (run.write) {
    if (!o.manifest.empty())
      write_json_file(o.manifest, manifest);
    else if (!o.out.empty() && o.out != "-")
      write_json_file(o.out + ".manifest.json", manifest);
    else
      std::cerr << manifest.dump() << '\n';
  }
  return code;
}

}  // namespace

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  Run run;
  json manifest;
  try {
    return run_command(args, run, &manifest);
  } catch (const std::exception& e) {
    return exit_for(e);
  }
}
