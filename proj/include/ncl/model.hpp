#pragma once
// NCO problem container and its compiled form with exact sparse derivatives:
// reverse mode for gradients and Jacobians, forward-over-reverse per additive
// element for Hessians. Sparsity is detected once at build time and is a
// superset of the true nonzero pattern.

#include <Eigen/Core>
#include <limits>
#include <string>
#include <vector>

#include <ncl/expr.hpp>

namespace ncl {

using dvec = Eigen::VectorXd;

constexpr double kInf = std::numeric_limits<double>::infinity();

// min f(t)  s.t.  c_eq(t) = 0,  lower <= c_ineq(t) <= upper,  lb <= t <= ub
struct NcoProblem {
  std::string name;
  int n = 0;  // decision variables t
  ExprGraph graph;
  int objective = -1;  // node id
  std::vector<int> eq;  // each component: expr == 0
  struct Range {
    int expr = -1;
    double lower = -kInf, upper = kInf;
  };
  std::vector<Range> ineq;
  dvec lb, ub;    // length n; +-inf for absent bounds
  dvec start;     // empty: default rule (midpoint of finite bounds, edge+-1
                  // for one-sided bounds, 0 for free variables)
  std::vector<std::string> var_names;  // optional, sized n when present
};

struct JacobianPattern {  // CSR, rows ordered eq then ineq, sorted columns
  int rows = 0, cols = 0;
  std::vector<int> ptr, idx;
  int nnz() const { return ptr.empty() ? 0 : ptr.back(); }
};

struct HessianPattern {  // lower triangle CSC: column j holds rows i >= j
  int n = 0;
  std::vector<int> ptr, idx;
  int nnz() const { return ptr.empty() ? 0 : ptr.back(); }
};

// Mutable buffers for one evaluation stream; a Model is immutable after
// construction and shareable across threads, each of which owns a workspace.
struct EvalWorkspace {
  std::vector<double> val, dot, bar, dbar;  // per graph node
  std::vector<double> acc;                  // per variable accumulator
  std::vector<double> hloc;                 // element-local dense Hessian row
};

class Model {
 public:
  explicit Model(NcoProblem p);

  const NcoProblem& problem() const { return p_; }
  const std::string& name() const { return p_.name; }
  int num_vars() const { return p_.n; }
  int num_eq() const { return static_cast<int>(p_.eq.size()); }
  int num_ineq() const { return static_cast<int>(p_.ineq.size()); }
  int num_cons() const { return num_eq() + num_ineq(); }
  const dvec& start() const { return start_; }

  EvalWorkspace make_workspace() const;

  double eval_objective(const dvec& t, EvalWorkspace& ws) const;
  // c sized num_cons(), equality components first
  void eval_constraints(const dvec& t, EvalWorkspace& ws, dvec& c) const;
  void eval_gradient(const dvec& t, EvalWorkspace& ws, dvec& g) const;
  // values in jacobian_pattern() order
  void eval_jacobian(const dvec& t, EvalWorkspace& ws,
                     std::vector<double>& jval) const;
  // obj_scale * grad^2 f - sum_i y_i grad^2 c_i, values in hessian_pattern()
  // order; y sized num_cons(), equality components first
  void eval_lag_hessian(const dvec& t, double obj_scale, const dvec& y,
                        EvalWorkspace& ws, std::vector<double>& hval) const;

  const JacobianPattern& jacobian_pattern() const { return jpat_; }
  const HessianPattern& hessian_pattern() const { return hpat_; }

 private:
  struct Element {  // additive piece of a root expression
    std::vector<int> tape;      // reachable node ids, ascending
    std::vector<int> vars;      // global variable indices, sorted
    bool nonlinear = false;     // polynomial degree >= 2 or transcendental
    std::vector<int> pair_slot; // vars.size()^2; hval slot for (seed a, b)
                                // when global(a) >= global(b), else -1
  };
  struct Root {
    int node = -1;
    std::vector<int> tape;
    std::vector<int> vars;
    std::vector<Element> elements;
  };

  void eval_tape(const std::vector<int>& tape, const dvec& t,
                 EvalWorkspace& ws) const;
  void reverse_tape(const Root& r, EvalWorkspace& ws) const;  // bar prepared
  void element_hessian(const Element& e, double weight, const dvec& t,
                       EvalWorkspace& ws, std::vector<double>& hval) const;

  NcoProblem p_;
  dvec start_;
  std::vector<Root> roots_;  // [0] objective, then eq, then ineq
  JacobianPattern jpat_;
  HessianPattern hpat_;
};

// NLP-form view x = (t, s): one slack per inequality, c(x) = 0 throughout.
struct NlpForm {
  int nt = 0, ns = 0, n = 0;    // n = nt + ns
  int m_eq = 0, m_ineq = 0, m = 0;
  dvec lb, ub;                  // length n; slack bounds are the ranges
  // inequality row j corresponds to constraint row m_eq + j and slack
  // variable nt + j with unit coefficient -1
};

NlpForm to_nlp_form(const Model& mdl);

}  // namespace ncl
