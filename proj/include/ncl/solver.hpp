#pragma once
// Augmented-Lagrangian outer loop around the interior-point subproblem
// solver: multiplier and penalty updates, extrapolation between
// subproblems, and unscaled termination checks on the original problem.

#include <string>
#include <vector>

#include <ncl/ipm.hpp>

namespace ncl {

enum class SolveStatus {
  Optimal,
  Infeasible,       // penalty at its cap with a stationary nonzero residual
  IterationLimit,
  NumericError,
};
const char* solve_status_name(SolveStatus s);

struct SolverOptions {
  KktForm kkt_form = KktForm::K1s;
  double tol = 1e-6;        // unscaled stationarity/feasibility target
  int max_outer = 40;
  int max_inner = 1000;     // accepted interior-point steps in total
  int max_sub_inner = 200;  // per subproblem
  double pivot_eps = 1e-10;
  bool scaling = true;
  double mu0 = 0.1;
  double rho0 = 100.0;
  double rho_max = 1e14;
};

struct SolveReport {
  SolveStatus status = SolveStatus::NumericError;
  std::string instance;
  std::string kkt_form;
  int outer_iters = 0;
  int inner_iters = 0;
  int extrapolation_accepts = 0;
  double objective = 0.0;      // original problem units
  double kkt_residual = 0.0;   // unscaled stationarity/complementarity
  double primal_feas = 0.0;    // unscaled constraint violation
  double mu_final = 0.0;
  double rho_final = 0.0;
  double solve_seconds = 0.0;
  std::vector<LogRow> log;     // k_inner = 0 rows mark outer entries
  std::vector<double> extrap_alpha;  // per outer k >= 1: accepted step
                                     // fraction, 0 when rejected
  dvec x, r, y, zl, zu;        // unscaled, x = (t, s)
};

// mu/eta/omega/rho schedule of the outer loop; returns true when the
// multiplier (success) branch was taken for this residual norm.
struct OuterState {
  double mu = 0.1;
  double eta = 0.0;
  double omega = 0.0;
  double rho = 100.0;
  double rho_max = 1e14;
};
OuterState initial_outer_state(double mu0, double rho0, double rho_max);
bool outer_update(OuterState& s, double rnorm);

// Regularized least-squares multiplier estimate from the gradient at x:
// (J J^T + 1e-8 I) y = J grad, components clipped to [-1e3, 1e3].
dvec init_multipliers(const ScaledProblem& sp, const dvec& x);

// Cold start: model start point with slacks set to their constraint values,
// pushed interior; multipliers from the least-squares estimate, bound duals
// from mu0 over the gaps, r = -c.
IterState initial_state(const ScaledProblem& sp, double mu0);

SolveReport solve(const Model& mdl, const SolverOptions& opt = {});

}  // namespace ncl
