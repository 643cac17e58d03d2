#pragma once
// Assembly and factorization of the regularized Newton systems for the
// penalty-barrier subproblem, in three interchangeable shapes:
//   K2  (n+2m): full primal/residual/dual block system
//   K2r (n+m):  residual variables eliminated
//   K1s (nt):   slacks and duals eliminated (condensed)
// All three eliminations are exact for any regularization delta, so the
// recovered (dx, dr, dy) agree across forms up to roundoff. Patterns and
// orderings are computed once per problem shape; each solve only refills
// values, factorizes with static pivoting, and escalates delta until the
// factorization reports the target inertia.

#include <array>
#include <string>
#include <vector>

#include <ncl/model.hpp>
#include <ncl/sparse.hpp>

namespace ncl {

enum class KktForm { K2, K2r, K1s };

KktForm parse_kkt_form(const std::string& name);  // "k2" | "k2r" | "k1s"
const char* kkt_form_name(KktForm f);

struct KktOptions {
  double pivot_eps = 1e-10;
  int max_refine = 10;
  double refine_tol = 1e-12;       // relative to the assembled rhs
  double delta_max = 1e40;
  double accept_tol = 1e-8;        // perturbed-pivot acceptance, relative
};

// Values for one Newton solve. Vector storage is owned by the caller; hval
// and jval follow the model patterns handed to the context (t block only),
// sigma covers the full x = (t, s) diagonal.
struct KktInput {
  const std::vector<double>* hval = nullptr;
  const std::vector<double>* jval = nullptr;
  dvec sigma;   // n
  dvec rbar1;   // n: grad phi - J^T y - mu/(x-l) + mu/(u-x)
  dvec rbar2;   // m: y_k + rho r - y
  dvec rbar3;   // m: c + r
  double rho = 0.0;
};

struct KktStep {
  dvec dx, dr, dy;
  double delta = 0.0;
  int factor_attempts = 0;
  int refine_steps = 0;
  int perturbed_pivots = 0;
  double rel_residual = 0.0;  // of the linear system actually solved
  bool ok = false;
};

class KktContext {
 public:
  KktContext(const HessianPattern& hp, const JacobianPattern& jp, int nt,
             int ns, int m_eq, KktForm form, KktOptions opt = {});

  // warm_delta: last successful delta, 0 when none. The first trial is
  // always unregularized.
  KktStep solve(const KktInput& in, double warm_delta);

  KktForm form() const { return form_; }
  std::array<int, 3> inertia_target() const;
  int system_size() const { return mat_.n; }
  const SparseSymMatrix& matrix() const { return mat_; }  // last refill

 private:
  void refill(const KktInput& in, double delta);
  void build_rhs(const KktInput& in, double delta, dvec& rhs) const;
  void recover(const KktInput& in, double delta, const dvec& sol,
               KktStep& st) const;

  KktForm form_;
  KktOptions opt_;
  int nt_, ns_, n_, m_eq_, m_ineq_, m_;
  JacobianPattern jp_;
  SparseSymMatrix mat_;
  SymbolicLdl sym_;
  std::vector<int> h_slot_;        // model hessian entry -> mat_ position
  std::vector<int> diag_slot_;     // x (or t) diagonal positions
  std::vector<int> j_slot_;        // K2/K2r: jacobian entry positions
  std::vector<int> slack_slot_;    // K2/K2r: slack column entries
  std::vector<int> rdiag_slot_;    // K2: residual block diagonal
  std::vector<int> ry_slot_;       // K2: residual/dual coupling
  std::vector<int> ydiag_slot_;    // K2r: dual block diagonal
  std::vector<int> pair_slot_;     // K1s: per-row J^T J scatter, row-major
  std::vector<int> pair_ptr_;      // K1s: row offsets into pair_slot_
};

// Bound-dual updates recovered from a primal step at barrier parameter mu;
// entries with infinite bounds stay zero.
void recover_bound_duals(const dvec& x, const dvec& lb, const dvec& ub,
                         const dvec& zl, const dvec& zu, double mu,
                         const dvec& dx, dvec& dzl, dvec& dzu);

// Unregularized first-order residual of the penalty-barrier subproblem,
// evaluated with the true penalty rho.
struct ResidualParts {
  dvec stat;               // n
  dvec mult;               // m
  dvec primal;             // m
  dvec compl_l, compl_u;   // n, zero where the bound is infinite
  double stat_norm() const;
  double mult_norm() const;
  double primal_norm() const;
  double compl_l_norm() const;
  double compl_u_norm() const;
  double inf_norm() const;
};

// grad_phi and x live in the full space x = (t, s); c is the constraint
// value with slacks already subtracted on inequality rows; jval/jp cover the
// t block and the implicit slack column is -1 per inequality row.
ResidualParts barrier_kkt_residual(const dvec& grad_phi,
                                   const std::vector<double>& jval,
                                   const JacobianPattern& jp, int ns,
                                   const dvec& c, const dvec& r, const dvec& y,
                                   const dvec& yk, double rho, const dvec& x,
                                   const dvec& lb, const dvec& ub,
                                   const dvec& zl, const dvec& zu, double mu);

}  // namespace ncl
