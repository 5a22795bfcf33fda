#include "polymom/polynomial.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <sstream>

namespace polymom {

Monomial operator*(const Monomial& a, const Monomial& b) {
  Monomial out(a.size() + b.size());
  std::merge(a.begin(), a.end(), b.begin(), b.end(), out.begin());
  return out;
}

namespace {

void basis_rec(const std::vector<int>& vars, int deg, size_t start, Monomial& cur, std::vector<Monomial>& out) {
  if (static_cast<int>(cur.size()) == deg) {
    out.push_back(cur);
    return;
  }
  for (size_t k = start; k < vars.size(); ++k) {
    cur.push_back(vars[k]);
    basis_rec(vars, deg, k, cur, out);
    cur.pop_back();
  }
}

}  // namespace

std::vector<Monomial> monomial_basis(const std::vector<int>& vars, int deg) {
  std::vector<int> sorted = vars;
  std::sort(sorted.begin(), sorted.end());
  sorted.erase(std::unique(sorted.begin(), sorted.end()), sorted.end());
  std::vector<Monomial> out;
  for (int k = 0; k <= deg; ++k) {
    Monomial cur;
    basis_rec(sorted, k, 0, cur, out);
  }
  return out;
}

Polynomial::Polynomial(double c) {
  if (c != 0.0) terms_[{}] = c;
}

Polynomial Polynomial::variable(int i) { return monomial({i}); }

Polynomial Polynomial::monomial(Monomial m, double c) {
  std::sort(m.begin(), m.end());
  Polynomial p;
  p.add_term(m, c);
  return p;
}

void Polynomial::add_term(const Monomial& m, double c) {
  if (c == 0.0) return;
  auto it = terms_.find(m);
  if (it == terms_.end()) {
    terms_.emplace(m, c);
  } else {
    it->second += c;
    if (it->second == 0.0) terms_.erase(it);
  }
}

int Polynomial::degree() const {
  int d = 0;
  for (const auto& [m, c] : terms_) d = std::max(d, static_cast<int>(m.size()));
  return d;
}

bool Polynomial::is_zero(double tol) const {
  for (const auto& [m, c] : terms_)
    if (std::abs(c) > tol) return false;
  return true;
}

double Polynomial::constant() const {
  auto it = terms_.find({});
  return it == terms_.end() ? 0.0 : it->second;
}

std::vector<int> Polynomial::variables() const {
  std::vector<int> v;
  for (const auto& [m, c] : terms_) v.insert(v.end(), m.begin(), m.end());
  std::sort(v.begin(), v.end());
  v.erase(std::unique(v.begin(), v.end()), v.end());
  return v;
}

double Polynomial::linear_coefficient(int i) const {
  auto it = terms_.find({i});
  return it == terms_.end() ? 0.0 : it->second;
}

Polynomial& Polynomial::operator+=(const Polynomial& p) {
  for (const auto& [m, c] : p.terms_) add_term(m, c);
  return *this;
}

Polynomial& Polynomial::operator-=(const Polynomial& p) {
  for (const auto& [m, c] : p.terms_) add_term(m, -c);
  return *this;
}

Polynomial& Polynomial::operator*=(double c) {
  if (c == 0.0) {
    terms_.clear();
    return *this;
  }
  for (auto& [m, v] : terms_) v *= c;
  return *this;
}

Polynomial operator*(const Polynomial& a, const Polynomial& b) {
  Polynomial out;
  for (const auto& [ma, ca] : a.terms_)
    for (const auto& [mb, cb] : b.terms_) out.add_term(ma * mb, ca * cb);
  return out;
}

Polynomial Polynomial::substitute(int var, const Polynomial& p) const {
  Polynomial out;
  // Powers of p are reused across terms.
  std::vector<Polynomial> powers{Polynomial(1.0)};
  for (const auto& [m, c] : terms_) {
    Monomial rest;
    int k = 0;
    for (int v : m) {
      if (v == var)
        ++k;
      else
        rest.push_back(v);
    }
    if (k == 0) {
      out.add_term(m, c);
      continue;
    }
    while (static_cast<int>(powers.size()) <= k) powers.push_back(powers.back() * p);
    for (const auto& [mp, cp] : powers[k].terms_) out.add_term(rest * mp, c * cp);
  }
  return out;
}

Polynomial Polynomial::pruned(double tol) const {
  Polynomial out;
  for (const auto& [m, c] : terms_)
    if (std::abs(c) > tol) out.terms_.emplace(m, c);
  return out;
}

double Polynomial::evaluate(const Eigen::VectorXd& x) const {
  double s = 0.0;
  for (const auto& [m, c] : terms_) {
    double t = c;
    for (int v : m) t *= x(v);
    s += t;
  }
  return s;
}

std::string Polynomial::to_string(const std::vector<std::string>& names) const {
  if (terms_.empty()) return "0";
  std::ostringstream os;
  os << std::setprecision(17);
  bool first = true;
  for (const auto& [m, c] : terms_) {
    if (!first) os << (c < 0 ? " - " : " + ");
    else if (c < 0) os << "-";
    first = false;
    const double a = std::abs(c);
    if (m.empty() || a != 1.0) os << a;
    for (size_t k = 0; k < m.size(); ++k) os << ((m.empty() || a != 1.0 || k > 0) ? "*" : "") << names[m[k]];
  }
  return os.str();
}

}  // namespace polymom
