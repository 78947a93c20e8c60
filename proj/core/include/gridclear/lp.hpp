#pragma once

// Dense linear programs with boxed variables and ranged rows:
//
//   min  costᵀx   s.t.  row_lower <= rows·x <= row_upper,  lower <= x <= upper.
//
// Variable bounds must be finite, which makes the problem bounded; rows may
// use ±infinity for one-sided constraints and equal bounds for equalities.

#include <string>
#include <vector>

#include <Eigen/Dense>

namespace gridclear::lp {

struct Problem {
  Eigen::VectorXd cost;
  Eigen::VectorXd lower;
  Eigen::VectorXd upper;
  Eigen::MatrixXd rows;
  Eigen::VectorXd row_lower;
  Eigen::VectorXd row_upper;
};

enum class Status { Optimal, Infeasible, IterationLimit };

std::string to_string(Status status);

struct Options {
  double feasibility_tol = 1e-9;  // on rows scaled to unit max coefficient
  double pivot_tol = 1e-9;
  int max_iterations = 0;         // 0 picks a limit from the problem size
  int refactor_interval = 64;
};

/// Multipliers follow the Lagrangian
///   costᵀx + Σ yu·(a·x − row_upper) + Σ yl·(row_lower − a·x)
///          + Σ zu·(x − upper) + Σ zl·(lower − x),
/// so every reported multiplier is non-negative and
///   cost + rowsᵀ(yu − yl) + zu − zl = 0 at an optimum.
struct Result {
  Status status = Status::IterationLimit;
  Eigen::VectorXd x;
  double objective = 0.0;
  Eigen::VectorXd row_dual_upper;
  Eigen::VectorXd row_dual_lower;
  Eigen::VectorXd bound_dual_upper;
  Eigen::VectorXd bound_dual_lower;
  /// Rows carrying weight in the infeasibility certificate.
  std::vector<int> infeasible_rows;
  /// True when variable bounds take part in the certificate.
  bool bounds_in_certificate = false;
  int iterations = 0;
};

/// Solves the dual of the problem with a revised primal simplex: each basis
/// is a vertex candidate of the original problem, and the most violated row
/// enters until every row holds. Throws ShapeError on inconsistent sizes and
/// DomainError on infinite or crossed variable bounds.
Result solve(const Problem& problem, const Options& options = {});

}  // namespace gridclear::lp
