#include <doctest.h>

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <vector>

#include <ncl/ipm.hpp>
#include <ncl/problems.hpp>

using namespace ncl;

namespace {

NcoProblem linear_prob(double gcoef, double jcoef) {
  NcoProblem p;
  p.name = "lin";
  p.n = 1;
  Ex t = wrap(p.graph, p.graph.variable(0));
  p.objective = (lit(p.graph, gcoef) * t).id;
  p.eq.push_back((lit(p.graph, jcoef) * t).id);
  p.lb = dvec::Constant(1, -kInf);
  p.ub = dvec::Constant(1, kInf);
  p.start = dvec::Zero(1);
  return p;
}

IterState init_state(const ScaledProblem& sp, double mu) {
  const NlpForm& f = sp.form();
  EvalWorkspace ws = sp.model().make_workspace();
  IterState s;
  s.x.setZero(f.n);
  const dvec t0 = sp.model().start();
  s.x.head(f.nt) = t0;
  if (f.m > 0) {
    dvec cm(f.m);
    sp.model().eval_constraints(t0, ws, cm);
    for (int k = 0; k < f.ns; ++k)
      s.x[f.nt + k] = sp.con_scale()[f.m_eq + k] * cm[f.m_eq + k];
  }
  push_interior(s.x, f.lb, f.ub);
  dvec c(f.m);
  sp.eval_c(s.x, ws, c);
  s.r = -c;
  s.y = dvec::Zero(f.m);
  s.zl = dvec::Zero(f.n);
  s.zu = dvec::Zero(f.n);
  for (int i = 0; i < f.n; ++i) {
    if (std::isfinite(f.lb[i]))
      s.zl[i] = std::clamp(mu / (s.x[i] - f.lb[i]), 1e-6, 1e6);
    if (std::isfinite(f.ub[i]))
      s.zu[i] = std::clamp(mu / (f.ub[i] - s.x[i]), 1e-6, 1e6);
  }
  return s;
}

Eigen::MatrixXd dense_w(const Model& mdl, const std::vector<double>& hv, int n) {
  Eigen::MatrixXd W = Eigen::MatrixXd::Zero(n, n);
  const HessianPattern& hp = mdl.hessian_pattern();
  for (int j = 0; j < hp.n; ++j)
    for (int p = hp.ptr[j]; p < hp.ptr[j + 1]; ++p) {
      const int i = hp.idx[p];
      W(i, j) = hv[p];
      W(j, i) = hv[p];
    }
  return W;
}

Eigen::MatrixXd dense_jx(const Model& mdl, const std::vector<double>& jv,
                         const NlpForm& f) {
  Eigen::MatrixXd J = Eigen::MatrixXd::Zero(f.m, f.n);
  const JacobianPattern& jp = mdl.jacobian_pattern();
  for (int i = 0; i < f.m; ++i)
    for (int p = jp.ptr[i]; p < jp.ptr[i + 1]; ++p) J(i, jp.idx[p]) += jv[p];
  for (int k = 0; k < f.ns; ++k) J(f.m_eq + k, f.nt + k) = -1.0;
  return J;
}

}  // namespace

TEST_SUITE("ipm") {

TEST_CASE("objective and constraint scales follow the start point") {
  {
    Model mdl(linear_prob(250.0, 4.0));
    ScaledProblem sp(mdl, true);
    CHECK(sp.obj_scale() == 0.004);
    CHECK(sp.con_scale()[0] == 0.25);
  }
  {
    Model mdl(linear_prob(0.5, 0.5));
    ScaledProblem sp(mdl, true);
    CHECK(sp.obj_scale() == 1.0);
    CHECK(sp.con_scale()[0] == 1.0);
  }
  {
    Model mdl(linear_prob(1e12, 1e12));
    ScaledProblem sp(mdl, true);
    CHECK(sp.obj_scale() == 1e-8);
    CHECK(sp.con_scale()[0] == 1e-8);
  }
  {
    Model mdl(linear_prob(250.0, 4.0));
    ScaledProblem sp(mdl, false);
    CHECK(sp.obj_scale() == 1.0);
    CHECK(sp.con_scale()[0] == 1.0);
  }
}

TEST_CASE("slack bounds carry their row scale") {
  NcoProblem p;
  p.name = "rng";
  p.n = 1;
  Ex t = wrap(p.graph, p.graph.variable(0));
  p.objective = sq(t).id;
  p.ineq.push_back({(lit(p.graph, 2.0) * t).id, 1.0, 3.0});
  p.lb = dvec::Constant(1, -kInf);
  p.ub = dvec::Constant(1, kInf);
  p.start = dvec::Zero(1);
  Model mdl(p);
  ScaledProblem sp(mdl, true);
  CHECK(sp.con_scale()[0] == 0.5);
  CHECK(sp.form().lb[1] == 0.5);
  CHECK(sp.form().ub[1] == 1.5);
  // round trip back to problem units
  dvec x(2);
  x << 0.7, 1.2;
  const dvec xu = sp.unscale_x(x);
  CHECK(xu[0] == 0.7);
  CHECK(xu[1] == 2.4);
}

TEST_CASE("equal bounds are relaxed to a thin box") {
  NcoProblem p;
  p.name = "pin";
  p.n = 2;
  Ex a = wrap(p.graph, p.graph.variable(0));
  Ex b = wrap(p.graph, p.graph.variable(1));
  p.objective = (sq(a) + sq(b)).id;
  p.lb = dvec(2);
  p.ub = dvec(2);
  p.lb << 5.0, 0.0;
  p.ub << 5.0, 0.0;
  p.start = dvec::Zero(2);
  Model mdl(p);
  ScaledProblem sp(mdl, false);
  CHECK(sp.form().lb[0] == 5.0 - 5e-8);
  CHECK(sp.form().ub[0] == 5.0 + 5e-8);
  CHECK(sp.form().lb[1] == -1e-8);
  CHECK(sp.form().ub[1] == 1e-8);
}

TEST_CASE("interior push clamps onto a padded box") {
  dvec lb(5), ub(5), x(5);
  lb << 0.0, 0.0, 0.0, -kInf, -kInf;
  ub << 1.0, 1.0, kInf, 2.0, kInf;
  x << 0.0, 5.0, 0.0, 3.0, 7.5;
  push_interior(x, lb, ub);
  CHECK(x[0] == 0.01);
  CHECK(x[1] == 0.99);
  CHECK(x[2] == 0.01);
  CHECK(x[3] == 2.0 - 0.02);
  CHECK(x[4] == 7.5);
}

TEST_CASE("fraction to boundary keeps a tau margin") {
  dvec lb(1), ub(1), x(1), dx(1);
  lb << 0.0;
  ub << 1.0;
  x << 0.5;
  dx << -1.0;
  CHECK(fraction_to_boundary(x, lb, ub, dx, 0.99) == 0.495);
  dx << 1.0;
  x << 0.9;
  CHECK(fraction_to_boundary(x, lb, ub, dx, 0.99) == doctest::Approx(0.099));
  dx << 0.3;
  x << 0.5;
  CHECK(fraction_to_boundary(x, lb, ub, dx, 0.99) == 1.0);

  dvec z(2), dz(2);
  z << 1.0, 0.0;
  dz << -2.0, -5.0;
  CHECK(dual_fraction_to_boundary(z, dz, 0.99) == 0.495);
  dz << 2.0, 5.0;
  CHECK(dual_fraction_to_boundary(z, dz, 0.99) == 1.0);
}

TEST_CASE("newton step satisfies the full optimality system") {
  for (const char* name : {"hs35", "hs6"}) {
    for (KktForm form : {KktForm::K2, KktForm::K2r, KktForm::K1s}) {
      CAPTURE(name);
      CAPTURE(kkt_form_name(form));
      Model mdl(build_instance(name));
      ScaledProblem sp(mdl, false);
      const NlpForm& f = sp.form();
      IterState s = init_state(sp, 0.1);
      const double mu = 0.1, rho = 100.0;
      const dvec yk = dvec::Zero(f.m);
      for (int i = 0; i < f.m; ++i) {
        s.r[i] += 0.01 * (i + 1);
        s.y[i] = 0.02 * (i + 1);
      }
      InnerSolver inner(sp, form);
      KktStep st = inner.newton_step(s, mu, rho, yk);
      REQUIRE(st.ok);

      EvalWorkspace ws = mdl.make_workspace();
      dvec gphi, c(f.m);
      sp.eval_grad(s.x, ws, gphi);
      sp.eval_c(s.x, ws, c);
      std::vector<double> jv(mdl.jacobian_pattern().nnz(), 0.0);
      std::vector<double> hv(mdl.hessian_pattern().nnz(), 0.0);
      sp.eval_jac(s.x, ws, jv);
      sp.eval_hess(s.x, s.y, ws, hv);
      Eigen::MatrixXd W = dense_w(mdl, hv, f.n);
      const Eigen::MatrixXd Jx = dense_jx(mdl, jv, f);
      dvec rbar1 = gphi - Jx.transpose() * s.y;
      for (int i = 0; i < f.n; ++i) {
        if (std::isfinite(f.lb[i])) {
          const double gl = s.x[i] - f.lb[i];
          W(i, i) += s.zl[i] / gl;
          rbar1[i] -= mu / gl;
        }
        if (std::isfinite(f.ub[i])) {
          const double gu = f.ub[i] - s.x[i];
          W(i, i) += s.zu[i] / gu;
          rbar1[i] += mu / gu;
        }
      }
      const dvec rbar2 = yk + rho * s.r - s.y;
      const dvec rbar3 = c + s.r;
      const double rhat = rho + st.delta;
      const Eigen::MatrixXd I = Eigen::MatrixXd::Identity(f.n, f.n);
      const dvec e1 = (W + st.delta * I) * st.dx - Jx.transpose() * st.dy + rbar1;
      const dvec e2 = rhat * st.dr - st.dy + rbar2;
      const dvec e3 = Jx * st.dx + st.dr + rbar3;
      const double scale =
          std::max({1.0, rbar1.lpNorm<Eigen::Infinity>(),
                    rbar2.lpNorm<Eigen::Infinity>(),
                    rbar3.lpNorm<Eigen::Infinity>()});
      CHECK(e1.lpNorm<Eigen::Infinity>() <= 1e-7 * scale);
      CHECK(e2.lpNorm<Eigen::Infinity>() <= 1e-7 * scale);
      CHECK(e3.lpNorm<Eigen::Infinity>() <= 1e-7 * scale);
    }
  }
}

TEST_CASE("subproblem converges on a convex instance") {
  Model mdl(build_instance("hs35"));
  ScaledProblem sp(mdl, true);
  IterState s = init_state(sp, 0.1);
  InnerSolver inner(sp, KktForm::K2r);
  SubproblemSpec spec;
  spec.mu = 0.1;
  spec.omega = 1e-8;
  spec.rho = 100.0;
  spec.yk = dvec::Zero(sp.form().m);
  spec.k_outer = 3;
  std::vector<LogRow> log;
  SubproblemResult res = inner.solve_subproblem(s, spec, log);
  REQUIRE(res.converged);
  CHECK(res.residual.inf_norm() <= 1e-8);
  CHECK(res.iters >= 1);
  CHECK(res.iters <= 60);
  CHECK(static_cast<int>(log.size()) == res.iters);
  for (int i = 0; i < static_cast<int>(log.size()); ++i) {
    CHECK(log[i].k_outer == 3);
    CHECK(log[i].k_inner == i + 1);
    CHECK(log[i].mu == 0.1);
    CHECK(log[i].rho == 100.0);
    CHECK(log[i].alpha > 0.0);
    CHECK(log[i].alpha <= 1.0);
  }
  // iterate stays interior and the duals stay inside the clip brackets
  const NlpForm& f = sp.form();
  for (int i = 0; i < f.n; ++i) {
    if (std::isfinite(f.lb[i])) {
      const double gap = s.x[i] - f.lb[i];
      CHECK(gap > 0.0);
      CHECK(s.zl[i] >= spec.mu / (1e10 * gap) * (1.0 - 1e-12));
      CHECK(s.zl[i] <= 1e10 * spec.mu / gap * (1.0 + 1e-12));
    } else {
      CHECK(s.zl[i] == 0.0);
    }
    if (std::isfinite(f.ub[i])) {
      const double gap = f.ub[i] - s.x[i];
      CHECK(gap > 0.0);
      CHECK(s.zu[i] >= spec.mu / (1e10 * gap) * (1.0 - 1e-12));
      CHECK(s.zu[i] <= 1e10 * spec.mu / gap * (1.0 + 1e-12));
    } else {
      CHECK(s.zu[i] == 0.0);
    }
  }
}

TEST_CASE("subproblem handles a bound-only instance") {
  Model mdl(build_instance("rosenbrock-box"));
  ScaledProblem sp(mdl, true);
  IterState s = init_state(sp, 0.1);
  InnerSolver inner(sp, KktForm::K1s);
  SubproblemSpec spec;
  spec.mu = 0.1;
  spec.omega = 1e-8;
  spec.rho = 100.0;
  spec.yk = dvec::Zero(0);
  std::vector<LogRow> log;
  SubproblemResult res = inner.solve_subproblem(s, spec, log);
  REQUIRE(res.converged);
  CHECK(res.residual.inf_norm() <= 1e-8);
  CHECK(s.r.size() == 0);
  CHECK(s.y.size() == 0);
}

TEST_CASE("subproblem runs are deterministic") {
  auto run = [](dvec& x_out) {
    Model mdl(build_instance("hs7"));
    ScaledProblem sp(mdl, true);
    IterState s = init_state(sp, 0.1);
    InnerSolver inner(sp, KktForm::K2);
    SubproblemSpec spec;
    spec.mu = 0.1;
    spec.omega = 1e-8;
    spec.rho = 100.0;
    spec.yk = dvec::Zero(sp.form().m);
    std::vector<LogRow> log;
    SubproblemResult res = inner.solve_subproblem(s, spec, log);
    x_out = s.x;
    return res.iters;
  };
  dvec x1, x2;
  const int it1 = run(x1);
  const int it2 = run(x2);
  CHECK(it1 == it2);
  CHECK((x1.array() == x2.array()).all());
}

TEST_CASE("iteration budgets cut the subproblem short") {
  Model mdl(build_instance("hs35"));
  ScaledProblem sp(mdl, true);
  InnerSolver inner(sp, KktForm::K2r);
  SubproblemSpec spec;
  spec.mu = 0.1;
  spec.omega = 1e-14;
  spec.rho = 100.0;
  spec.yk = dvec::Zero(sp.form().m);
  {
    IterState s = init_state(sp, 0.1);
    spec.max_iter = 1;
    std::vector<LogRow> log;
    SubproblemResult res = inner.solve_subproblem(s, spec, log);
    CHECK(res.iters == 1);
    CHECK_FALSE(res.converged);
  }
  {
    IterState s = init_state(sp, 0.1);
    spec.max_iter = 200;
    spec.budget_left = 0;
    std::vector<LogRow> log;
    SubproblemResult res = inner.solve_subproblem(s, spec, log);
    CHECK(res.iters == 0);
    CHECK(log.empty());
    CHECK_FALSE(res.converged);
  }
}

TEST_CASE("extrapolation commits an exact quadratic step") {
  NcoProblem p;
  p.name = "quad";
  p.n = 1;
  Ex t = wrap(p.graph, p.graph.variable(0));
  p.objective = (lit(p.graph, 0.5) * t * t).id;
  p.lb = dvec::Constant(1, -kInf);
  p.ub = dvec::Constant(1, kInf);
  p.start = dvec::Constant(1, 1.0);
  Model mdl(p);
  ScaledProblem sp(mdl, false);
  IterState s;
  s.x = dvec::Constant(1, 1.0);
  s.r = dvec::Zero(0);
  s.y = dvec::Zero(0);
  s.zl = dvec::Zero(1);
  s.zu = dvec::Zero(1);
  InnerSolver inner(sp, KktForm::K2);
  CHECK(inner.extrapolate(s, 0.01, 100.0, dvec::Zero(0)));
  CHECK(s.x[0] == 0.0);
}

TEST_CASE("extrapolation rejects a wild overshoot") {
  NcoProblem p;
  p.name = "flat";
  p.n = 1;
  Ex t = wrap(p.graph, p.graph.variable(0));
  p.objective = sqrt(lit(p.graph, 1.0) + t * t).id;
  p.lb = dvec::Constant(1, -kInf);
  p.ub = dvec::Constant(1, kInf);
  p.start = dvec::Constant(1, 10.0);
  Model mdl(p);
  ScaledProblem sp(mdl, false);
  IterState s;
  s.x = dvec::Constant(1, 10.0);
  s.r = dvec::Zero(0);
  s.y = dvec::Zero(0);
  s.zl = dvec::Zero(1);
  s.zu = dvec::Zero(1);
  InnerSolver inner(sp, KktForm::K2);
  CHECK_FALSE(inner.extrapolate(s, 0.01, 100.0, dvec::Zero(0)));
  CHECK(s.x[0] == 10.0);
}

}  // TEST_SUITE
