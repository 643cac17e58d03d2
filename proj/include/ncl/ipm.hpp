#pragma once
// Primal-dual interior-point inner solver for one penalty subproblem at a
// fixed barrier parameter. Works entirely in the scaled space x = (t, s);
// the scaling itself is decided once from values at the start point.

#include <vector>

#include <ncl/kkt.hpp>
#include <ncl/model.hpp>

namespace ncl {

// Objective/constraint scaling plus the slack-extended bound box. Slack
// bounds are multiplied by their row scale so the slack columns keep unit
// coefficients; exactly-equal bounds are relaxed by a tiny margin so the
// interior stays nonempty.
class ScaledProblem {
 public:
  ScaledProblem(const Model& mdl, bool enable_scaling);

  const Model& model() const { return *mdl_; }
  const NlpForm& form() const { return form_; }
  int n() const { return form_.n; }
  int m() const { return form_.m; }
  double obj_scale() const { return obj_scale_; }
  const dvec& con_scale() const { return con_scale_; }

  double eval_phi(const dvec& x, EvalWorkspace& ws) const;
  void eval_grad(const dvec& x, EvalWorkspace& ws, dvec& g) const;  // n
  void eval_c(const dvec& x, EvalWorkspace& ws, dvec& c) const;     // m
  void eval_jac(const dvec& x, EvalWorkspace& ws,
                std::vector<double>& jval) const;
  void eval_hess(const dvec& x, const dvec& y_scaled, EvalWorkspace& ws,
                 std::vector<double>& hval) const;

  // unscaled views for reporting
  double unscale_obj(double phi) const { return phi / obj_scale_; }
  dvec unscale_x(const dvec& x) const;       // slacks divided by row scale
  dvec unscale_y(const dvec& y) const;       // sigma_c y / sigma_f
  dvec unscale_z(const dvec& z) const;       // z / sigma_f, slack rows times
                                             // their sigma_c
  dvec unscale_r(const dvec& r) const;       // r / sigma_c

 private:
  const Model* mdl_;
  NlpForm form_;
  double obj_scale_ = 1.0;
  dvec con_scale_;
};

// Current iterate of the penalty subproblem, scaled space.
struct IterState {
  dvec x;        // n
  dvec r, y;     // m
  dvec zl, zu;   // n, zero on infinite bounds
};

// Clamp x into the interior of [lb, ub] with a proportional push.
void push_interior(dvec& x, const dvec& lb, const dvec& ub);

// Largest step <= 1 keeping x + a*dx a tau-fraction inside the box.
double fraction_to_boundary(const dvec& x, const dvec& lb, const dvec& ub,
                            const dvec& dx, double tau);
// Same for the nonnegative duals; only strictly positive entries bind.
double dual_fraction_to_boundary(const dvec& z, const dvec& dz, double tau);

struct LogRow {
  int k_outer = 0, k_inner = 0;
  double f_stat = 0, f_mult = 0, f_primal = 0, f_compl_l = 0, f_compl_u = 0;
  double mu = 0, rho = 0, delta = 0, alpha = 0;
  int refine_steps = 0, perturbed_pivots = 0;
};

struct SubproblemSpec {
  double mu = 0.1;
  double omega = 1.0;    // stationarity target on the full residual
  double rho = 100.0;
  dvec yk;               // m
  int max_iter = 200;    // accepted steps for this subproblem
  int budget_left = 1000;  // global cap shared across subproblems
  int k_outer = 0;       // for log rows
};

struct SubproblemResult {
  bool converged = false;
  bool linear_solver_failed = false;
  bool line_search_stalled = false;
  int iters = 0;          // accepted steps
  ResidualParts residual; // at exit
};

class InnerSolver {
 public:
  InnerSolver(const ScaledProblem& sp, KktForm form, KktOptions opt = {});

  ResidualParts residual(const IterState& s, double mu, double rho,
                         const dvec& yk);
  // One Newton solve of the regularized system at the current point.
  KktStep newton_step(const IterState& s, double mu, double rho,
                      const dvec& yk);

  // Damped Newton shot at the new subproblem data; commits the trial and
  // returns true when it contracts the new residual sufficiently.
  bool extrapolate(IterState& s, double mu, double rho, const dvec& yk,
                   double* alpha_out = nullptr);

  SubproblemResult solve_subproblem(IterState& s, const SubproblemSpec& spec,
                                    std::vector<LogRow>& log);

  double warm_delta() const { return warm_delta_; }
  const KktContext& context() const { return ctx_; }

 private:
  void prepare(const dvec& x);  // grad_, c_, jval_ at x
  ResidualParts residual_at(const dvec& x, const dvec& r, const dvec& y,
                            const dvec& zl, const dvec& zu, double mu,
                            double rho, const dvec& yk);
  KktStep solve_prepared(const IterState& s, double mu, double rho,
                         const dvec& yk);
  double barrier_objective(const dvec& x, const dvec& r, double mu, double rho,
                           const dvec& yk, EvalWorkspace& ws) const;
  void clip_duals(IterState& s, double mu) const;

  const ScaledProblem* sp_;
  KktContext ctx_;
  EvalWorkspace ws_;
  std::vector<double> hval_, jval_;
  dvec grad_, c_;
  double warm_delta_ = 0.0;
};

}  // namespace ncl
