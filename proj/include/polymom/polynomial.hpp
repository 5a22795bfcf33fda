#pragma once

#include <map>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace polymom {

/// Sorted list of variable indices with repetition; {} is the constant 1.
using Monomial = std::vector<int>;

Monomial operator*(const Monomial& a, const Monomial& b);

/// Graded lexicographic order: lower degree first, then lexicographic.
struct GradedLex {
  bool operator()(const Monomial& a, const Monomial& b) const {
    if (a.size() != b.size()) return a.size() < b.size();
    return a < b;
  }
};

/// All monomials of degree <= deg in the given (sorted) variables, graded-lex.
std::vector<Monomial> monomial_basis(const std::vector<int>& vars, int deg);

class Polynomial {
 public:
  using Terms = std::map<Monomial, double, GradedLex>;

  Polynomial() = default;
  Polynomial(double c);  // NOLINT: constants convert implicitly
  static Polynomial variable(int i);
  static Polynomial monomial(Monomial m, double c = 1.0);

  const Terms& terms() const { return terms_; }
  int degree() const;
  bool is_zero(double tol = 0.0) const;
  double constant() const;
  /// Sorted distinct variables.
  std::vector<int> variables() const;
  /// Coefficient of x_i in the linear part.
  double linear_coefficient(int i) const;

  Polynomial& operator+=(const Polynomial& p);
  Polynomial& operator-=(const Polynomial& p);
  Polynomial& operator*=(double c);

  friend Polynomial operator+(Polynomial a, const Polynomial& b) { return a += b; }
  friend Polynomial operator-(Polynomial a, const Polynomial& b) { return a -= b; }
  friend Polynomial operator*(Polynomial a, double c) { return a *= c; }
  friend Polynomial operator*(double c, Polynomial a) { return a *= c; }
  friend Polynomial operator*(const Polynomial& a, const Polynomial& b);
  friend Polynomial operator-(Polynomial a) { return a *= -1.0; }

  /// Replaces x_var by p everywhere.
  Polynomial substitute(int var, const Polynomial& p) const;
  /// Drops terms with |coefficient| <= tol.
  Polynomial pruned(double tol) const;
  double evaluate(const Eigen::VectorXd& x) const;
  std::string to_string(const std::vector<std::string>& names) const;

  bool operator==(const Polynomial& o) const { return terms_ == o.terms_; }

 private:
  Terms terms_;
  void add_term(const Monomial& m, double c);
};

}  // namespace polymom
