#include "polymom/model.hpp"

#include <cmath>

#include "polymom/error.hpp"

namespace polymom {

namespace {
constexpr std::uint64_t kSeedUnit = 0x5eed;
constexpr std::uint64_t kSmoothUnit = 0x5300;
}  // namespace

SeedDistribution SeedDistribution::gaussian() { return {}; }

SeedDistribution SeedDistribution::sphere(double radius) {
  if (!(radius > 0.0)) throw DomainError("sphere radius must be positive");
  SeedDistribution s;
  s.kind = Kind::rotation_invariant;
  s.radial_moment = [radius](int e) { return std::pow(radius, e); };
  s.radial_sampler = [radius](Stream&) { return radius; };
  return s;
}

double gaussian_norm_moment(int r, int e) {
  return std::exp(0.5 * e * std::log(2.0) + std::lgamma(0.5 * (r + e)) - std::lgamma(0.5 * r));
}

Eigen::MatrixXd sample_seeds(int r, const SeedDistribution& seed, std::int64_t n, std::uint64_t rng_seed) {
  if (n < 1) throw DomainError("sample count must be positive");
  if (seed.kind == SeedDistribution::Kind::rotation_invariant && !seed.radial_sampler)
    throw ConfigurationError("rotation-invariant seed needs a radial sampler");
  Eigen::MatrixXd x(n, r);
  for (std::int64_t k = 0; k < n; ++k) {
    Stream s(rng_seed, kSeedUnit, static_cast<std::uint64_t>(k));
    Eigen::VectorXd g = s.normal_vector(r);
    if (seed.kind == SeedDistribution::Kind::rotation_invariant) {
      const double nrm = g.norm();
      g *= seed.radial_sampler(s) / (nrm > 0.0 ? nrm : 1.0);
    }
    x.row(k) = g.transpose();
  }
  return x;
}

Eigen::MatrixXd sample(const PolyNetwork& net, const SeedDistribution& seed, std::int64_t n, std::uint64_t rng_seed) {
  net.validate();
  const Eigen::MatrixXd x = sample_seeds(net.r, seed, n, rng_seed);
  Eigen::MatrixXd z(n, net.d);
  for (std::int64_t k = 0; k < n; ++k) {
    const Eigen::VectorXd xk = x.row(k).transpose();
    for (int a = 0; a < net.d; ++a) z(k, a) = net.evaluate(a, xk);
  }
  return z;
}

PolyNetwork smooth_quadratic(const SmoothingParams& params) {
  const PolyNetwork& base = params.base;
  if (base.kind != NetworkKind::quadratic) throw DomainError("smooth_quadratic needs a quadratic base network");
  if (params.rho < 0.0) throw DomainError("rho must be nonnegative");
  const double scale = params.rho / std::sqrt(static_cast<double>(base.r));
  std::vector<Eigen::MatrixXd> q;
  for (int a = 0; a < base.d; ++a) {
    Stream s(params.rng_seed, kSmoothUnit, static_cast<std::uint64_t>(a));
    Eigen::MatrixXd g(base.r, base.r);
    for (int i = 0; i < base.r; ++i)
      for (int j = i; j < base.r; ++j) {
        g(i, j) = s.normal();
        g(j, i) = g(i, j);
      }
    q.push_back(base.Q[a] + scale * g);
  }
  PolyNetwork out = PolyNetwork::quadratic(std::move(q));
  out.smoothing = SmoothingInfo{params.rho, params.rng_seed};
  return out;
}

PolyNetwork smooth_componentwise(const SmoothingParams& params) {
  const PolyNetwork& base = params.base;
  if (base.kind != NetworkKind::lowrank) throw DomainError("smooth_componentwise needs a lowrank base network");
  if (params.rho < 0.0) throw DomainError("rho must be nonnegative");
  const double scale = params.rho / std::sqrt(static_cast<double>(base.r));
  auto comps = base.components;
  for (int a = 0; a < base.d; ++a)
    for (int t = 0; t < base.ell; ++t) {
      Stream s(params.rng_seed, kSmoothUnit + 1, static_cast<std::uint64_t>(a) * 4096u + static_cast<std::uint64_t>(t));
      comps[a][t] += scale * s.normal_vector(base.r);
    }
  PolyNetwork out = PolyNetwork::lowrank(base.omega, std::move(comps));
  out.smoothing = SmoothingInfo{params.rho, params.rng_seed};
  return out;
}

PolyNetwork zero_quadratic(int r, int d) {
  if (r < 1 || d < 1) throw DomainError("zero_quadratic needs r, d >= 1");
  return PolyNetwork::quadratic(std::vector<Eigen::MatrixXd>(d, Eigen::MatrixXd::Zero(r, r)));
}

PolyNetwork zero_lowrank(int r, int d, int omega, int ell) {
  if (r < 1 || d < 1 || ell < 1) throw DomainError("zero_lowrank needs r, d, ell >= 1");
  return PolyNetwork::lowrank(omega, std::vector<std::vector<Eigen::VectorXd>>(
                                         d, std::vector<Eigen::VectorXd>(ell, Eigen::VectorXd::Zero(r))));
}

double w1_upper_bound(double dist, int r, int d, int omega, const SeedDistribution& seed) {
  if (dist < 0.0) throw DomainError("distance must be nonnegative");
  double moment = 0.0;
  if (seed.kind == SeedDistribution::Kind::gaussian) {
    moment = gaussian_norm_moment(r, omega);
  } else {
    if (!seed.radial_moment) throw ConfigurationError("rotation-invariant seed needs a radial moment oracle");
    moment = seed.radial_moment(omega);
  }
  return dist * std::sqrt(static_cast<double>(d)) * moment;
}

}  // namespace polymom
