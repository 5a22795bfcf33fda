#include "polymom/network.hpp"

#include <cmath>
#include <string>

#include "polymom/error.hpp"

namespace polymom {

PolyNetwork PolyNetwork::quadratic(std::vector<Eigen::MatrixXd> q) {
  if (q.empty()) throw DomainError("network needs at least one unit");
  PolyNetwork net;
  net.kind = NetworkKind::quadratic;
  net.r = static_cast<int>(q.front().rows());
  net.d = static_cast<int>(q.size());
  net.omega = 2;
  net.Q = std::move(q);
  net.validate();
  return net;
}

PolyNetwork PolyNetwork::lowrank(int omega, std::vector<std::vector<Eigen::VectorXd>> components) {
  if (components.empty() || components.front().empty()) throw DomainError("network needs at least one component");
  PolyNetwork net;
  net.kind = NetworkKind::lowrank;
  net.r = static_cast<int>(components.front().front().size());
  net.d = static_cast<int>(components.size());
  net.omega = omega;
  net.ell = static_cast<int>(components.front().size());
  net.components = std::move(components);
  net.validate();
  return net;
}

PolyNetwork PolyNetwork::general(std::vector<SymTensor> tensors) {
  if (tensors.empty()) throw DomainError("network needs at least one unit");
  PolyNetwork net;
  net.kind = NetworkKind::tensor;
  net.r = tensors.front().dim();
  net.d = static_cast<int>(tensors.size());
  net.omega = tensors.front().order();
  net.tensors = std::move(tensors);
  net.validate();
  return net;
}

void PolyNetwork::validate() const {
  if (r < 1 || d < 1) throw DomainError("network needs r >= 1 and d >= 1");
  switch (kind) {
    case NetworkKind::quadratic:
      if (omega != 2) throw DomainError("quadratic network must have omega = 2");
      if (static_cast<int>(Q.size()) != d) throw DomainError("quadratic network: expected d matrices");
      for (const auto& q : Q) {
        if (q.rows() != r || q.cols() != r) throw DomainError("quadratic network: matrix must be r x r");
        if ((q - q.transpose()).cwiseAbs().maxCoeff() > 1e-12) throw DomainError("quadratic network: Q must be symmetric");
        if (!q.allFinite()) throw DomainError("quadratic network: non-finite entry");
      }
      break;
    case NetworkKind::lowrank:
      if (omega < 1 || omega % 2 == 0) throw DomainError("lowrank network needs odd omega");
      if (static_cast<int>(components.size()) != d) throw DomainError("lowrank network: expected d component lists");
      for (const auto& unit : components) {
        if (static_cast<int>(unit.size()) != ell) throw DomainError("lowrank network: every unit needs ell components");
        for (const auto& v : unit) {
          if (v.size() != r) throw DomainError("lowrank network: component must have length r");
          if (!v.allFinite()) throw DomainError("lowrank network: non-finite entry");
        }
      }
      break;
    case NetworkKind::tensor:
      if (static_cast<int>(tensors.size()) != d) throw DomainError("tensor network: expected d tensors");
      for (const auto& t : tensors)
        if (t.dim() != r || t.order() != omega) throw DomainError("tensor network: shape mismatch");
      break;
  }
}

DenseTensor PolyNetwork::unit(int a) const {
  if (a < 0 || a >= d) throw DomainError("unit index out of range");
  switch (kind) {
    case NetworkKind::quadratic:
      return from_matrix(Q[a]);
    case NetworkKind::lowrank: {
      DenseTensor t(omega, r);
      for (const auto& v : components[a]) t.values() += outer_power(v, omega).values();
      return t;
    }
    case NetworkKind::tensor:
      return tensors[a].to_dense();
  }
  return {};
}

SymTensor PolyNetwork::unit_sym(int a) const {
  if (kind == NetworkKind::tensor) {
    if (a < 0 || a >= d) throw DomainError("unit index out of range");
    return tensors[a];
  }
  return SymTensor::symmetrize(unit(a));
}

std::vector<DenseTensor> PolyNetwork::units() const {
  std::vector<DenseTensor> out;
  out.reserve(d);
  for (int a = 0; a < d; ++a) out.push_back(unit(a));
  return out;
}

double PolyNetwork::radius() const {
  double rad = 0.0;
  for (int a = 0; a < d; ++a) rad = std::max(rad, unit(a).norm());
  return rad;
}

double PolyNetwork::evaluate(int a, const Eigen::VectorXd& x) const {
  switch (kind) {
    case NetworkKind::quadratic:
      return x.dot(Q[a] * x);
    case NetworkKind::lowrank: {
      double z = 0.0;
      for (const auto& v : components[a]) z += std::pow(v.dot(x), omega);
      return z;
    }
    case NetworkKind::tensor: {
      const auto& t = tensors[a];
      const auto& tab = t.table();
      double z = 0.0;
      for (int k = 0; k < tab.size(); ++k) {
        double mono = static_cast<double>(tab.mult[k]);
        for (int i : tab.sorted[k]) mono *= x(i);
        z += t.values()(k) * mono;
      }
      return z;
    }
  }
  return 0.0;
}

PolyNetwork rotate_network(const PolyNetwork& net, const GaugeRotation& v) {
  if (v.dim() != net.r) throw DomainError("rotate_network: rotation dimension mismatch");
  const Eigen::MatrixXd& V = v.matrix();
  PolyNetwork out = net;
  switch (net.kind) {
    case NetworkKind::quadratic:
      for (auto& q : out.Q) {
        q = V * q * V.transpose();
        q = 0.5 * (q + q.transpose());
      }
      break;
    case NetworkKind::lowrank:
      for (auto& unit : out.components)
        for (auto& c : unit) c = V * c;
      break;
    case NetworkKind::tensor:
      for (auto& t : out.tensors) t = SymTensor::symmetrize(rotate_tensor(V, t.to_dense()));
      break;
  }
  return out;
}

Eigen::VectorXd contract_pairs(const DenseTensor& t) {
  if (t.order() % 2 == 0) throw DomainError("paired contraction needs odd order");
  const int r = t.dim();
  const int p = t.order() / 2;
  Eigen::VectorXd f = Eigen::VectorXd::Zero(r);
  const std::int64_t pairs = ipow(r, p);
  Index idx(t.order());
  for (std::int64_t c = 0; c < pairs; ++c) {
    std::int64_t rem = c;
    for (int k = p - 1; k >= 0; --k) {
      const int j = static_cast<int>(rem % r);
      rem /= r;
      idx[2 * k] = j;
      idx[2 * k + 1] = j;
    }
    for (int k = 0; k < r; ++k) {
      idx[t.order() - 1] = k;
      f(k) += t(idx);
    }
  }
  return f;
}

Eigen::MatrixXd equivariant_matrix(const DenseTensor& t) {
  const int r = t.dim();
  if (t.order() == 2) return to_matrix(t);
  if (t.order() % 2 == 1) {
    const Eigen::VectorXd f = contract_pairs(t);
    return f * f.transpose();
  }
  const int p = (t.order() - 2) / 2;
  Eigen::MatrixXd g = Eigen::MatrixXd::Zero(r, r);
  const std::int64_t pairs = ipow(r, p);
  Index idx(t.order());
  for (std::int64_t c = 0; c < pairs; ++c) {
    std::int64_t rem = c;
    for (int k = p - 1; k >= 0; --k) {
      const int j = static_cast<int>(rem % r);
      rem /= r;
      idx[2 * k] = j;
      idx[2 * k + 1] = j;
    }
    for (int i = 0; i < r; ++i)
      for (int k = 0; k < r; ++k) {
        idx[t.order() - 2] = i;
        idx[t.order() - 1] = k;
        g(i, k) += t(idx);
      }
  }
  return g;
}

}  // namespace polymom
