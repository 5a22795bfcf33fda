#pragma once

#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "polymom/polynomial.hpp"

namespace polymom {

/**
 * Polynomial feasibility program: p = 0 and p >= 0 constraints over named
 * variables, relaxed at a declared even degree.
 *
 * Variable groups give block-diagonal moment matrices: each group carries its
 * own degree, and a constraint is localized in the first group that contains
 * all of its variables at sufficient degree. Constraints that fit no group are
 * imposed on their pseudo-moments directly. With no groups declared a single
 * dense group over all variables at `degree` is used.
 */
struct PolynomialProgram {
  struct Constraint {
    Polynomial p;
    std::string family;
  };
  struct Group {
    std::vector<int> vars;
    int degree = 2;
  };

  std::vector<std::string> variables;
  std::vector<Constraint> equalities;
  std::vector<Constraint> inequalities;
  std::vector<Group> groups;
  /// Families in emission order, including ones with no instances.
  std::vector<std::string> families;
  int degree = 2;

  int add_variable(std::string name);
  void add_family(const std::string& family);
  void add_equality(Polynomial p, const std::string& family);
  void add_inequality(Polynomial p, const std::string& family);

  /// Instance count per family, in emission order.
  std::vector<std::pair<std::string, int>> family_counts() const;
  /// Throws DomainError on undeclared variables or constraints above `degree`.
  void validate() const;
  /// Largest violation at a point: |p| for equalities, max(0, −p) for inequalities.
  double max_violation(const Eigen::VectorXd& point) const;
};

struct SolverConfig {
  double tol = 1e-7;
  int max_iter = 50000;
  /// Cap on the side of any moment or localizing matrix.
  int max_dim = 5000;
  /// Cap on the number of pseudo-moments (dense affine elimination).
  int max_moments = 6000;
  int stall_window = 1000;
  double rho = 1.0;
  /// Weight of the trace tie-break objective.
  double trace_weight = 1.0;
  /// Over-relaxation factor in (0, 2).
  double alpha = 1.6;
  /// Interior-point iterations used to warm-start ADMM (0 = cold start).
  int ipm_iter = 100;
  double ipm_eps = 1e-10;
  /// Cone shift εI used by the interior-point phase.
  double ipm_shift = 1e-8;
  /// Print residuals to stderr every this many iterations (0 = silent).
  int log_every = 0;
};

/// Degree-D linear functional on polynomials, stored on the reduced monomials
/// that survive linear-equality elimination.
class Pseudoexpectation {
 public:
  int degree = 0;
  std::vector<std::string> variables;
  /// Eliminated variable → affine expression in the kept variables.
  std::map<int, Polynomial> substitution;
  std::vector<Monomial> monomials;
  Eigen::VectorXd values;
  /// One moment matrix per group.
  std::vector<Eigen::MatrixXd> moment_matrices;
  std::vector<std::vector<Monomial>> bases;

  /// Rewrites p in the kept variables.
  Polynomial reduce(const Polynomial& p) const;
  /// Ẽ[p]; throws DomainError if p leaves the stored support.
  double operator()(const Polynomial& p) const;
  const Eigen::MatrixXd& moment_matrix() const { return moment_matrices.front(); }
  bool supports(const Monomial& m) const { return index_.count(m) > 0; }
  /// Must be called after `monomials` changes.
  void rebuild_index();

 private:
  std::map<Monomial, int, GradedLex> index_;
};

enum class SolveStatus { converged, infeasible, max_iterations };

struct SolveResult {
  SolveStatus status = SolveStatus::converged;
  Pseudoexpectation pe;
  int iterations = 0;
  int ipm_iterations = 0;
  double primal_residual = 0.0;
  double dual_residual = 0.0;
  std::string message;

  bool feasible() const { return status != SolveStatus::infeasible; }
};

/**
 * ADMM on the moment relaxation: pseudo-moments y live on an affine set
 * (normalization, localized equalities), moment and localizing matrices are
 * split off as PSD copies, and the trace of the moment matrices is minimized
 * as a tie-break. The affine elimination and the normal-equation factor are
 * computed once.
 */
SolveResult solve(const PolynomialProgram& program, const SolverConfig& cfg = {});

double pseudo_expect(const Pseudoexpectation& pe, const Polynomial& p);

/// Text listing of variables, constraints by family and moment-matrix sides.
void dump_relaxation(const PolynomialProgram& program, std::ostream& os);

}  // namespace polymom
