#include <ncl/ipm.hpp>

#include <algorithm>
#include <cmath>
#include <utility>

namespace ncl {

namespace {

double scale_from(double nrm) {
  if (!(nrm > 0.0)) return 1.0;
  return std::max(1e-8, std::min(1.0, 1.0 / nrm));
}

}  // namespace

ScaledProblem::ScaledProblem(const Model& mdl, bool enable_scaling)
    : mdl_(&mdl), form_(to_nlp_form(mdl)) {
  con_scale_ = dvec::Ones(form_.m);
  if (enable_scaling) {
    EvalWorkspace ws = mdl.make_workspace();
    const dvec& t0 = mdl.start();
    dvec g(form_.nt);
    mdl.eval_gradient(t0, ws, g);
    obj_scale_ = scale_from(form_.nt > 0 ? g.lpNorm<Eigen::Infinity>() : 0.0);
    const JacobianPattern& jp = mdl.jacobian_pattern();
    std::vector<double> jval(jp.nnz(), 0.0);
    mdl.eval_jacobian(t0, ws, jval);
    for (int i = 0; i < form_.m; ++i) {
      double rn = 0.0;
      for (int p = jp.ptr[i]; p < jp.ptr[i + 1]; ++p)
        rn = std::max(rn, std::abs(jval[p]));
      con_scale_[i] = scale_from(rn);
    }
  }
  for (int k = 0; k < form_.ns; ++k) {
    const double s = con_scale_[form_.m_eq + k];
    form_.lb[form_.nt + k] *= s;
    form_.ub[form_.nt + k] *= s;
  }
  for (int i = 0; i < form_.n; ++i) {
    if (std::isfinite(form_.lb[i]) && form_.lb[i] == form_.ub[i]) {
      const double e = 1e-8 * std::max(1.0, std::abs(form_.lb[i]));
      form_.lb[i] -= e;
      form_.ub[i] += e;
    }
  }
}

double ScaledProblem::eval_phi(const dvec& x, EvalWorkspace& ws) const {
  const dvec t = x.head(form_.nt);
  return obj_scale_ * mdl_->eval_objective(t, ws);
}

void ScaledProblem::eval_grad(const dvec& x, EvalWorkspace& ws, dvec& g) const {
  const dvec t = x.head(form_.nt);
  dvec gt(form_.nt);
  mdl_->eval_gradient(t, ws, gt);
  g.setZero(form_.n);
  g.head(form_.nt) = obj_scale_ * gt;
}

void ScaledProblem::eval_c(const dvec& x, EvalWorkspace& ws, dvec& c) const {
  const dvec t = x.head(form_.nt);
  mdl_->eval_constraints(t, ws, c);
  c.array() *= con_scale_.array();
  for (int k = 0; k < form_.ns; ++k) c[form_.m_eq + k] -= x[form_.nt + k];
}

void ScaledProblem::eval_jac(const dvec& x, EvalWorkspace& ws,
                             std::vector<double>& jval) const {
  const dvec t = x.head(form_.nt);
  mdl_->eval_jacobian(t, ws, jval);
  const JacobianPattern& jp = mdl_->jacobian_pattern();
  for (int i = 0; i < form_.m; ++i)
    for (int p = jp.ptr[i]; p < jp.ptr[i + 1]; ++p) jval[p] *= con_scale_[i];
}

void ScaledProblem::eval_hess(const dvec& x, const dvec& y_scaled,
                              EvalWorkspace& ws,
                              std::vector<double>& hval) const {
  const dvec t = x.head(form_.nt);
  const dvec y_eff = y_scaled.cwiseProduct(con_scale_);
  mdl_->eval_lag_hessian(t, obj_scale_, y_eff, ws, hval);
}

dvec ScaledProblem::unscale_x(const dvec& x) const {
  dvec out = x;
  for (int k = 0; k < form_.ns; ++k) out[form_.nt + k] /= con_scale_[form_.m_eq + k];
  return out;
}

dvec ScaledProblem::unscale_y(const dvec& y) const {
  return y.cwiseProduct(con_scale_) / obj_scale_;
}

dvec ScaledProblem::unscale_z(const dvec& z) const {
  dvec out = z / obj_scale_;
  for (int k = 0; k < form_.ns; ++k) out[form_.nt + k] *= con_scale_[form_.m_eq + k];
  return out;
}

dvec ScaledProblem::unscale_r(const dvec& r) const {
  return r.cwiseQuotient(con_scale_);
}

void push_interior(dvec& x, const dvec& lb, const dvec& ub) {
  for (int i = 0; i < x.size(); ++i) {
    const bool fl = std::isfinite(lb[i]), fu = std::isfinite(ub[i]);
    if (fl && fu) {
      const double gap = ub[i] - lb[i];
      const double pl = std::min(1e-2 * std::max(1.0, std::abs(lb[i])), 1e-2 * gap);
      const double pu = std::min(1e-2 * std::max(1.0, std::abs(ub[i])), 1e-2 * gap);
      x[i] = std::clamp(x[i], lb[i] + pl, ub[i] - pu);
    } else if (fl) {
      x[i] = std::max(x[i], lb[i] + 1e-2 * std::max(1.0, std::abs(lb[i])));
    } else if (fu) {
      x[i] = std::min(x[i], ub[i] - 1e-2 * std::max(1.0, std::abs(ub[i])));
    }
  }
}

double fraction_to_boundary(const dvec& x, const dvec& lb, const dvec& ub,
                            const dvec& dx, double tau) {
  double a = 1.0;
  for (int i = 0; i < x.size(); ++i) {
    if (dx[i] < 0.0 && std::isfinite(lb[i]))
      a = std::min(a, tau * (x[i] - lb[i]) / (-dx[i]));
    else if (dx[i] > 0.0 && std::isfinite(ub[i]))
      a = std::min(a, tau * (ub[i] - x[i]) / dx[i]);
  }
  return std::max(a, 0.0);
}

double dual_fraction_to_boundary(const dvec& z, const dvec& dz, double tau) {
  double a = 1.0;
  for (int i = 0; i < z.size(); ++i)
    if (z[i] > 0.0 && dz[i] < 0.0) a = std::min(a, tau * z[i] / (-dz[i]));
  return std::max(a, 0.0);
}

InnerSolver::InnerSolver(const ScaledProblem& sp, KktForm form, KktOptions opt)
    : sp_(&sp),
      ctx_(sp.model().hessian_pattern(), sp.model().jacobian_pattern(),
           sp.form().nt, sp.form().ns, sp.form().m_eq, form, opt),
      ws_(sp.model().make_workspace()),
      hval_(sp.model().hessian_pattern().nnz(), 0.0),
      jval_(sp.model().jacobian_pattern().nnz(), 0.0) {}

void InnerSolver::prepare(const dvec& x) {
  sp_->eval_grad(x, ws_, grad_);
  sp_->eval_c(x, ws_, c_);
  sp_->eval_jac(x, ws_, jval_);
}

ResidualParts InnerSolver::residual(const IterState& s, double mu, double rho,
                                    const dvec& yk) {
  prepare(s.x);
  const NlpForm& f = sp_->form();
  return barrier_kkt_residual(grad_, jval_, sp_->model().jacobian_pattern(),
                              f.ns, c_, s.r, s.y, yk, rho, s.x, f.lb, f.ub,
                              s.zl, s.zu, mu);
}

ResidualParts InnerSolver::residual_at(const dvec& x, const dvec& r,
                                       const dvec& y, const dvec& zl,
                                       const dvec& zu, double mu, double rho,
                                       const dvec& yk) {
  const NlpForm& f = sp_->form();
  dvec g, c;
  std::vector<double> jv(jval_.size(), 0.0);
  sp_->eval_grad(x, ws_, g);
  sp_->eval_c(x, ws_, c);
  sp_->eval_jac(x, ws_, jv);
  return barrier_kkt_residual(g, jv, sp_->model().jacobian_pattern(), f.ns, c,
                              r, y, yk, rho, x, f.lb, f.ub, zl, zu, mu);
}

KktStep InnerSolver::solve_prepared(const IterState& s, double mu, double rho,
                                    const dvec& yk) {
  const NlpForm& f = sp_->form();
  sp_->eval_hess(s.x, s.y, ws_, hval_);
  KktInput in;
  in.hval = &hval_;
  in.jval = &jval_;
  in.rho = rho;
  in.sigma.setZero(f.n);
  in.rbar1 = grad_;
  for (int i = 0; i < f.n; ++i) {
    if (std::isfinite(f.lb[i])) {
      const double gl = s.x[i] - f.lb[i];
      in.sigma[i] += s.zl[i] / gl;
      in.rbar1[i] -= mu / gl;
    }
    if (std::isfinite(f.ub[i])) {
      const double gu = f.ub[i] - s.x[i];
      in.sigma[i] += s.zu[i] / gu;
      in.rbar1[i] += mu / gu;
    }
  }
  const JacobianPattern& jp = sp_->model().jacobian_pattern();
  for (int i = 0; i < f.m; ++i)
    for (int p = jp.ptr[i]; p < jp.ptr[i + 1]; ++p)
      in.rbar1[jp.idx[p]] -= jval_[p] * s.y[i];
  for (int k = 0; k < f.ns; ++k) in.rbar1[f.nt + k] += s.y[f.m_eq + k];
  in.rbar2 = yk + rho * s.r - s.y;
  in.rbar3 = c_ + s.r;
  KktStep st = ctx_.solve(in, warm_delta_);
  if (st.ok) warm_delta_ = st.delta;
  return st;
}

KktStep InnerSolver::newton_step(const IterState& s, double mu, double rho,
                                 const dvec& yk) {
  prepare(s.x);
  return solve_prepared(s, mu, rho, yk);
}

double InnerSolver::barrier_objective(const dvec& x, const dvec& r, double mu,
                                      double rho, const dvec& yk,
                                      EvalWorkspace& ws) const {
  const NlpForm& f = sp_->form();
  double v = sp_->eval_phi(x, ws) + yk.dot(r) + 0.5 * rho * r.squaredNorm();
  for (int i = 0; i < f.n; ++i) {
    if (std::isfinite(f.lb[i])) v -= mu * std::log(x[i] - f.lb[i]);
    if (std::isfinite(f.ub[i])) v -= mu * std::log(f.ub[i] - x[i]);
  }
  return v;
}

void InnerSolver::clip_duals(IterState& s, double mu) const {
  const NlpForm& f = sp_->form();
  constexpr double kap = 1e10;
  for (int i = 0; i < f.n; ++i) {
    if (std::isfinite(f.lb[i])) {
      const double gap = std::max(s.x[i] - f.lb[i], 1e-300);
      s.zl[i] = std::clamp(s.zl[i], mu / (kap * gap), kap * mu / gap);
    } else {
      s.zl[i] = 0.0;
    }
    if (std::isfinite(f.ub[i])) {
      const double gap = std::max(f.ub[i] - s.x[i], 1e-300);
      s.zu[i] = std::clamp(s.zu[i], mu / (kap * gap), kap * mu / gap);
    } else {
      s.zu[i] = 0.0;
    }
  }
}

bool InnerSolver::extrapolate(IterState& s, double mu, double rho,
                              const dvec& yk, double* alpha_out) {
  const NlpForm& f = sp_->form();
  prepare(s.x);
  const ResidualParts res0 = barrier_kkt_residual(
      grad_, jval_, sp_->model().jacobian_pattern(), f.ns, c_, s.r, s.y, yk,
      rho, s.x, f.lb, f.ub, s.zl, s.zu, mu);
  const double f0 = res0.inf_norm();
  KktStep st = solve_prepared(s, mu, rho, yk);
  if (!st.ok) return false;
  dvec dzl, dzu;
  recover_bound_duals(s.x, f.lb, f.ub, s.zl, s.zu, mu, st.dx, dzl, dzu);
  const double tau = std::max(0.99, 1.0 - mu);
  double a = fraction_to_boundary(s.x, f.lb, f.ub, st.dx, tau);
  a = std::min(a, dual_fraction_to_boundary(s.zl, dzl, tau));
  a = std::min(a, dual_fraction_to_boundary(s.zu, dzu, tau));
  dvec xt = s.x + a * st.dx;
  dvec rt = s.r + a * st.dr;
  dvec yt = s.y + a * st.dy;
  dvec zlt = s.zl + a * dzl;
  dvec zut = s.zu + a * dzu;
  const ResidualParts rp = residual_at(xt, rt, yt, zlt, zut, mu, rho, yk);
  if (!(rp.inf_norm() <= 0.5 * f0 + 10.0 * std::pow(a, 0.2) * mu)) return false;
  s.x = std::move(xt);
  s.r = std::move(rt);
  s.y = std::move(yt);
  s.zl = std::move(zlt);
  s.zu = std::move(zut);
  clip_duals(s, mu);
  if (alpha_out) *alpha_out = a;
  return true;
}

SubproblemResult InnerSolver::solve_subproblem(IterState& s,
                                               const SubproblemSpec& spec,
                                               std::vector<LogRow>& log) {
  SubproblemResult out;
  const NlpForm& f = sp_->form();
  const JacobianPattern& jp = sp_->model().jacobian_pattern();
  const double tau = std::max(0.99, 1.0 - spec.mu);
  constexpr double kGamma = 1e-5;
  std::vector<std::pair<double, double>> filter;  // (theta, phi) history
  LogRow pend;
  bool have_pend = false;
  int consec_stall = 0;
  for (;;) {
    prepare(s.x);
    out.residual = barrier_kkt_residual(grad_, jval_, jp, f.ns, c_, s.r, s.y,
                                        spec.yk, spec.rho, s.x, f.lb, f.ub,
                                        s.zl, s.zu, spec.mu);
    if (have_pend) {
      pend.f_stat = out.residual.stat_norm();
      pend.f_mult = out.residual.mult_norm();
      pend.f_primal = out.residual.primal_norm();
      pend.f_compl_l = out.residual.compl_l_norm();
      pend.f_compl_u = out.residual.compl_u_norm();
      log.push_back(pend);
      have_pend = false;
    }
    if (out.residual.inf_norm() <= spec.omega) {
      out.converged = true;
      break;
    }
    if (out.iters >= spec.max_iter || out.iters >= spec.budget_left) break;
    KktStep st = solve_prepared(s, spec.mu, spec.rho, spec.yk);
    if (!st.ok) {
      out.linear_solver_failed = true;
      break;
    }
    dvec dzl, dzu;
    recover_bound_duals(s.x, f.lb, f.ub, s.zl, s.zu, spec.mu, st.dx, dzl, dzu);
    const double amax = fraction_to_boundary(s.x, f.lb, f.ub, st.dx, tau);
    const double az = std::min(dual_fraction_to_boundary(s.zl, dzl, tau),
                               dual_fraction_to_boundary(s.zu, dzu, tau));
    const double th0 = (c_ + s.r).lpNorm<1>();
    const double ph0 = barrier_objective(s.x, s.r, spec.mu, spec.rho, spec.yk, ws_);
    const double f0 = out.residual.inf_norm();
    filter.emplace_back(th0, ph0);
    double alpha = amax;
    bool accepted = false;
    dvec xt, rt, yt, ct;
    for (int ls = 0; ls < 30; ++ls) {
      xt = s.x + alpha * st.dx;
      rt = s.r + alpha * st.dr;
      yt = s.y + alpha * st.dy;
      sp_->eval_c(xt, ws_, ct);
      const double th = (ct + rt).lpNorm<1>();
      const double ph = barrier_objective(xt, rt, spec.mu, spec.rho, spec.yk, ws_);
      bool pass = std::isfinite(th) && std::isfinite(ph);
      for (const auto& [thf, phf] : filter) {
        if (!pass) break;
        const bool th_ok = thf > 0.0 && th <= (1.0 - kGamma) * thf;
        const bool ph_ok = ph <= phf - kGamma * thf;
        if (!th_ok && !ph_ok) pass = false;
      }
      if (pass) {
        accepted = true;
        break;
      }
      // fallback: plain residual contraction including the dual trial
      dvec zlt = s.zl + std::min(alpha, az) * dzl;
      dvec zut = s.zu + std::min(alpha, az) * dzu;
      const ResidualParts rp =
          residual_at(xt, rt, yt, zlt, zut, spec.mu, spec.rho, spec.yk);
      if (rp.inf_norm() <= (1.0 - 1e-4 * alpha) * f0) {
        accepted = true;
        break;
      }
      alpha *= 0.5;
    }
    if (!accepted) {
      out.line_search_stalled = true;
      if (++consec_stall >= 2) break;
      continue;
    }
    consec_stall = 0;
    s.x = std::move(xt);
    s.r = std::move(rt);
    s.y = std::move(yt);
    s.zl += az * dzl;
    s.zu += az * dzu;
    clip_duals(s, spec.mu);
    ++out.iters;
    pend = LogRow{};
    pend.k_outer = spec.k_outer;
    pend.k_inner = out.iters;
    pend.mu = spec.mu;
    pend.rho = spec.rho;
    pend.delta = st.delta;
    pend.alpha = alpha;
    pend.refine_steps = st.refine_steps;
    pend.perturbed_pivots = st.perturbed_pivots;
    have_pend = true;
  }
  return out;
}

}  // namespace ncl
