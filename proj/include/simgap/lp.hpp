#pragma once

#include <Eigen/Dense>
#include <cstddef>
#include <string>

namespace simgap {

/// min c^T y  subject to  A y <= b, with y free.
struct LinearProgram {
  Eigen::MatrixXd A;
  Eigen::VectorXd b;
  Eigen::VectorXd c;

  std::size_t num_vars() const { return static_cast<std::size_t>(A.cols()); }
  std::size_t num_constraints() const { return static_cast<std::size_t>(A.rows()); }
};

enum class LpStatus { optimal, infeasible, unbounded };

std::string to_string(LpStatus s);

struct LpOptions {
  double feasibility_tol = 1e-9;
  double optimality_tol = 1e-9;
  double pivot_tol = 1e-11;
  std::size_t max_iterations = 1'000'000;
  /// Programs with more rows are solved by row generation over working sets.
  std::size_t working_set_threshold = 400;
  std::size_t working_set_batch = 64;
};

struct LpResult {
  LpStatus status = LpStatus::infeasible;
  /// Optimal basic solution (status optimal).
  Eigen::VectorXd y;
  double objective = 0.0;
  /// Infeasible: a constraint row carrying the largest weight in the Farkas
  /// certificate.
  std::size_t violated_row = 0;
  /// Infeasible: nonnegative row weights w with A^T w = 0 and b^T w < 0.
  Eigen::VectorXd certificate;
  /// Unbounded: direction d with A d <= 0 and c^T d < 0.
  Eigen::VectorXd direction;
  std::size_t iterations = 0;
};

/// Two-phase revised simplex with Bland's anti-cycling rule.
///
/// Scenario programs have a handful of variables and thousands of rows, so
/// the simplex runs on the dual standard form
///   min b^T w  s.t.  A^T w = -c,  w >= 0
/// whose basis has only num_vars columns and is refactorized every pivot.
/// The primal optimum is read off as the simplex multipliers of the final
/// dual basis, a basic solution of the primal. Dual unboundedness certifies
/// primal infeasibility; dual infeasibility is split into primal
/// infeasible/unbounded with one extra bounded Farkas program. Primal columns
/// are scaled to unit max-norm before solving.
///
/// Above `working_set_threshold` rows the solver works on a subset of rows
/// and adds the most violated ones (in batches) until the subset optimum is
/// feasible for every row. The result is then a basic optimum of the full
/// program.
LpResult solve_lp(const LinearProgram& lp, const LpOptions& options = {});

/// Largest violation max_i (A y - b)_i (<= 0 when feasible).
double max_violation(const LinearProgram& lp, const Eigen::VectorXd& y);

}  // namespace simgap
