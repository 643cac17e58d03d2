#include <ncl/solver.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>

#include <ncl/sparse.hpp>

namespace ncl {

const char* solve_status_name(SolveStatus s) {
  switch (s) {
    case SolveStatus::Optimal: return "optimal";
    case SolveStatus::Infeasible: return "infeasible";
    case SolveStatus::IterationLimit: return "iteration_limit";
    case SolveStatus::NumericError: return "numeric_error";
  }
  return "unknown";
}

OuterState initial_outer_state(double mu0, double rho0, double rho_max) {
  OuterState s;
  s.mu = mu0;
  s.eta = std::pow(mu0, 1.1);
  s.omega = 100.0 * std::pow(mu0, 1.05);
  s.rho = rho0;
  s.rho_max = rho_max;
  return s;
}

bool outer_update(OuterState& s, double rnorm) {
  if (rnorm <= s.eta) {
    const double mu_old = s.mu;
    s.mu = std::max(std::min(std::pow(mu_old, 1.99), 0.2 * mu_old), 1e-14);
    s.eta = std::max(std::min(std::pow(s.mu, 1.1), 0.1 * mu_old), 1e-12);
    s.omega = std::max(100.0 * std::pow(s.mu, 1.05), 1e-12);
    return true;
  }
  s.rho = std::min(s.rho_max, 10.0 * s.rho);
  return false;
}

dvec init_multipliers(const ScaledProblem& sp, const dvec& x) {
  const NlpForm& f = sp.form();
  if (f.m == 0) return dvec();
  EvalWorkspace ws = sp.model().make_workspace();
  dvec g;
  sp.eval_grad(x, ws, g);
  const JacobianPattern& jp = sp.model().jacobian_pattern();
  std::vector<double> jv(jp.nnz(), 0.0);
  sp.eval_jac(x, ws, jv);

  std::vector<int> rows, cols;
  std::vector<double> vals;
  for (int i = 0; i < f.m; ++i) {
    for (int j = 0; j <= i; ++j) {
      double dot = 0.0;
      int pa = jp.ptr[i], pb = jp.ptr[j];
      while (pa < jp.ptr[i + 1] && pb < jp.ptr[j + 1]) {
        if (jp.idx[pa] < jp.idx[pb]) {
          ++pa;
        } else if (jp.idx[pa] > jp.idx[pb]) {
          ++pb;
        } else {
          dot += jv[pa++] * jv[pb++];
        }
      }
      if (i == j) {
        if (i >= f.m_eq) dot += 1.0;  // slack column
        rows.push_back(i);
        cols.push_back(i);
        vals.push_back(dot + 1e-8);
      } else if (dot != 0.0) {
        rows.push_back(i);
        cols.push_back(j);
        vals.push_back(dot);
      }
    }
  }
  const SparseSymMatrix A = sym_from_triplets(f.m, rows, cols, vals);
  const SymbolicLdl sym = analyze(A);
  const LdlFactors fac = factorize(sym, A, 1e-14);
  dvec rhs = dvec::Zero(f.m);
  for (int i = 0; i < f.m; ++i)
    for (int p = jp.ptr[i]; p < jp.ptr[i + 1]; ++p)
      rhs[i] += jv[p] * g[jp.idx[p]];
  dvec y(f.m);
  ldl_solve(sym, fac, rhs.data(), y.data());
  for (int i = 0; i < f.m; ++i) y[i] = std::clamp(y[i], -1e3, 1e3);
  return y;
}

IterState initial_state(const ScaledProblem& sp, double mu) {
  const NlpForm& f = sp.form();
  EvalWorkspace ws = sp.model().make_workspace();
  IterState s;
  s.x.setZero(f.n);
  const dvec t0 = sp.model().start();
  s.x.head(f.nt) = t0;
  if (f.ns > 0) {
    dvec cm(f.m);
    sp.model().eval_constraints(t0, ws, cm);
    for (int k = 0; k < f.ns; ++k)
      s.x[f.nt + k] = sp.con_scale()[f.m_eq + k] * cm[f.m_eq + k];
  }
  push_interior(s.x, f.lb, f.ub);
  s.y = init_multipliers(sp, s.x);
  s.zl = dvec::Zero(f.n);
  s.zu = dvec::Zero(f.n);
  for (int i = 0; i < f.n; ++i) {
    if (std::isfinite(f.lb[i]))
      s.zl[i] = std::clamp(mu / (s.x[i] - f.lb[i]), 1e-6, 1e6);
    if (std::isfinite(f.ub[i]))
      s.zu[i] = std::clamp(mu / (f.ub[i] - s.x[i]), 1e-6, 1e6);
  }
  dvec c(f.m);
  sp.eval_c(s.x, ws, c);
  s.r = -c;
  return s;
}

namespace {

struct UnscaledKkt {
  double stat = 0.0;
  double compl_max = 0.0;
  double primal = 0.0;
};

UnscaledKkt unscaled_kkt(const ScaledProblem& sp, const ScaledProblem& spu,
                         const IterState& s, EvalWorkspace& ws) {
  const NlpForm& fu = spu.form();
  const dvec xu = sp.unscale_x(s.x);
  const dvec yu = sp.unscale_y(s.y);
  const dvec zlu = sp.unscale_z(s.zl);
  const dvec zuu = sp.unscale_z(s.zu);
  dvec g, c(fu.m);
  spu.eval_grad(xu, ws, g);
  spu.eval_c(xu, ws, c);
  std::vector<double> jv(spu.model().jacobian_pattern().nnz(), 0.0);
  spu.eval_jac(xu, ws, jv);
  const dvec r0 = dvec::Zero(fu.m);
  const ResidualParts rp = barrier_kkt_residual(
      g, jv, spu.model().jacobian_pattern(), fu.ns, c, r0, yu, yu, 0.0, xu,
      fu.lb, fu.ub, zlu, zuu, 0.0);
  UnscaledKkt out;
  out.stat = rp.stat_norm();
  out.compl_max = std::max(rp.compl_l_norm(), rp.compl_u_norm());
  out.primal = rp.primal_norm();
  return out;
}

}  // namespace

SolveReport solve(const Model& mdl, const SolverOptions& opt) {
  const auto t_start = std::chrono::steady_clock::now();
  SolveReport rep;
  rep.instance = mdl.name();
  rep.kkt_form = kkt_form_name(opt.kkt_form);

  ScaledProblem sp(mdl, opt.scaling);
  ScaledProblem spu(mdl, false);
  const NlpForm& f = sp.form();
  KktOptions kopt;
  kopt.pivot_eps = opt.pivot_eps;
  InnerSolver inner(sp, opt.kkt_form, kopt);
  EvalWorkspace ws = mdl.make_workspace();

  IterState s = initial_state(sp, opt.mu0);
  dvec yk = s.y;
  OuterState os = initial_outer_state(opt.mu0, opt.rho0, opt.rho_max);
  int total_inner = 0;
  rep.status = SolveStatus::IterationLimit;

  for (int k = 0; k < opt.max_outer; ++k) {
    rep.outer_iters = k + 1;
    if (k > 0) {
      double a = 0.0;
      if (inner.extrapolate(s, os.mu, os.rho, yk, &a))
        ++rep.extrapolation_accepts;
      rep.extrap_alpha.push_back(a);
    }
    {
      const ResidualParts entry = inner.residual(s, os.mu, os.rho, yk);
      LogRow row;
      row.k_outer = k;
      row.k_inner = 0;
      row.f_stat = entry.stat_norm();
      row.f_mult = entry.mult_norm();
      row.f_primal = entry.primal_norm();
      row.f_compl_l = entry.compl_l_norm();
      row.f_compl_u = entry.compl_u_norm();
      row.mu = os.mu;
      row.rho = os.rho;
      rep.log.push_back(row);
    }
    SubproblemSpec spec;
    spec.mu = os.mu;
    spec.omega = os.omega;
    spec.rho = os.rho;
    spec.yk = yk;
    spec.max_iter = opt.max_sub_inner;
    spec.budget_left = std::max(0, opt.max_inner - total_inner);
    spec.k_outer = k;
    const SubproblemResult sub = inner.solve_subproblem(s, spec, rep.log);
    total_inner += sub.iters;
    rep.inner_iters = total_inner;
    if (sub.linear_solver_failed) {
      rep.status = SolveStatus::NumericError;
      break;
    }

    const double rnorm = f.m > 0 ? s.r.lpNorm<Eigen::Infinity>() : 0.0;
    const double rho_used = os.rho;
    const bool rho_capped = os.rho >= opt.rho_max;
    const bool success = outer_update(os, rnorm);
    if (success && f.m > 0) yk += rho_used * s.r;

    const UnscaledKkt u = unscaled_kkt(sp, spu, s, ws);
    rep.kkt_residual = std::max(u.stat, u.compl_max);
    rep.primal_feas = u.primal;
    rep.mu_final = os.mu;
    rep.rho_final = os.rho;
    if (u.stat <= opt.tol && u.compl_max <= opt.tol && u.primal <= opt.tol &&
        os.mu <= opt.tol) {
      rep.status = SolveStatus::Optimal;
      break;
    }
    if (!success && rho_capped && sub.converged && rnorm > opt.tol) {
      rep.status = SolveStatus::Infeasible;
      break;
    }
    if (total_inner >= opt.max_inner) {
      rep.status = SolveStatus::IterationLimit;
      break;
    }
  }

  rep.x = sp.unscale_x(s.x);
  rep.r = sp.unscale_r(s.r);
  rep.y = sp.unscale_y(s.y);
  rep.zl = sp.unscale_z(s.zl);
  rep.zu = sp.unscale_z(s.zu);
  {
    const dvec t = rep.x.head(f.nt);
    rep.objective = mdl.eval_objective(t, ws);
  }
  rep.mu_final = os.mu;
  rep.rho_final = os.rho;
  rep.solve_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start)
          .count();
  return rep;
}

}  // namespace ncl
