#include <doctest.h>

#include <Eigen/Dense>
#include <cmath>
#include <vector>

#include <ncl/problems.hpp>
#include <ncl/solver.hpp>

using namespace ncl;

namespace {

bool close_to(double v, double target, double tol) {
  return std::abs(v - target) <= tol * std::max(1.0, std::abs(target));
}

NcoProblem one_row_problem(double gcoef) {
  NcoProblem p;
  p.name = "one";
  p.n = 1;
  Ex t = wrap(p.graph, p.graph.variable(0));
  p.objective = (lit(p.graph, gcoef) * t).id;
  p.eq.push_back(t.id);
  p.lb = dvec::Constant(1, -kInf);
  p.ub = dvec::Constant(1, kInf);
  p.start = dvec::Zero(1);
  return p;
}

}  // namespace

TEST_SUITE("solver") {

TEST_CASE("outer schedule follows the frozen chain") {
  OuterState os = initial_outer_state(0.1, 100.0, 1e14);
  CHECK(os.mu == 0.1);
  CHECK(os.eta == doctest::Approx(0.0794328234724).epsilon(1e-10));
  CHECK(os.omega == doctest::Approx(8.91250938134).epsilon(1e-10));
  CHECK(os.rho == 100.0);

  REQUIRE(outer_update(os, 0.05));  // within eta: multiplier branch
  CHECK(os.mu == std::pow(0.1, 1.99));
  CHECK(os.mu == doctest::Approx(0.0102329299228).epsilon(1e-10));
  CHECK(os.eta == std::min(std::pow(os.mu, 1.1), 0.01));
  CHECK(os.eta == doctest::Approx(0.0064717).epsilon(1e-4));
  CHECK(os.omega == doctest::Approx(0.813594).epsilon(1e-4));
  CHECK(os.rho == 100.0);

  const double mu2 = os.mu;
  REQUIRE(outer_update(os, 0.0));
  CHECK(os.mu == std::pow(mu2, 1.99));
  CHECK(os.mu == doctest::Approx(1.09648e-4).epsilon(1e-4));
  const double mu3 = os.mu;
  REQUIRE(outer_update(os, 0.0));
  CHECK(os.mu == std::pow(mu3, 1.99));
  CHECK(os.mu < 2e-8);

  OuterState of = initial_outer_state(0.1, 100.0, 1e14);
  const double mu_keep = of.mu, eta_keep = of.eta, omega_keep = of.omega;
  CHECK_FALSE(outer_update(of, 1.0));
  CHECK(of.rho == 1000.0);
  CHECK(of.mu == mu_keep);
  CHECK(of.eta == eta_keep);
  CHECK(of.omega == omega_keep);
  of.rho = 5e13;
  CHECK_FALSE(outer_update(of, 1.0));
  CHECK(of.rho == 1e14);
  CHECK_FALSE(outer_update(of, 1.0));
  CHECK(of.rho == 1e14);
}

TEST_CASE("multiplier estimate solves the regularized normal equations") {
  {
    Model mdl(one_row_problem(3.0));
    ScaledProblem sp(mdl, false);
    const dvec y = init_multipliers(sp, dvec::Zero(1));
    REQUIRE(y.size() == 1);
    CHECK(y[0] == doctest::Approx(3.0 / (1.0 + 1e-8)).epsilon(1e-14));
  }
  {
    Model mdl(one_row_problem(1e9));
    ScaledProblem sp(mdl, false);
    const dvec y = init_multipliers(sp, dvec::Zero(1));
    CHECK(y[0] == 1e3);  // clipped
  }
  for (const char* name : {"dup-rows", "hs35"}) {
    CAPTURE(std::string(name));
    Model mdl(build_instance(name));
    ScaledProblem sp(mdl, false);
    const NlpForm& f = sp.form();
    dvec x = dvec::Zero(f.n);
    x.head(f.nt) = mdl.start();
    push_interior(x, f.lb, f.ub);
    const dvec y = init_multipliers(sp, x);
    REQUIRE(y.size() == f.m);

    // dense replay of the normal equations
    EvalWorkspace ws = mdl.make_workspace();
    dvec g;
    sp.eval_grad(x, ws, g);
    std::vector<double> jv(mdl.jacobian_pattern().nnz(), 0.0);
    sp.eval_jac(x, ws, jv);
    const JacobianPattern& jp = mdl.jacobian_pattern();
    Eigen::MatrixXd J = Eigen::MatrixXd::Zero(f.m, f.n);
    for (int i = 0; i < f.m; ++i)
      for (int p = jp.ptr[i]; p < jp.ptr[i + 1]; ++p) J(i, jp.idx[p]) = jv[p];
    for (int k = 0; k < f.ns; ++k) J(f.m_eq + k, f.nt + k) = -1.0;
    Eigen::MatrixXd N = J * J.transpose();
    N.diagonal().array() += 1e-8;
    const dvec y_ref = N.fullPivLu().solve(J * g);
    for (int i = 0; i < f.m; ++i)
      CHECK(y[i] == doctest::Approx(std::clamp(y_ref[i], -1e3, 1e3))
                        .epsilon(1e-8));
  }
  {
    // duplicated rows share the estimate evenly
    Model mdl(build_instance("dup-rows"));
    ScaledProblem sp(mdl, false);
    dvec x = dvec::Zero(sp.form().n);
    x.head(sp.form().nt) = mdl.start();
    const dvec y = init_multipliers(sp, x);
    REQUIRE(y.size() == 2);
    CHECK(y[0] == doctest::Approx(y[1]).epsilon(1e-6));
  }
}

TEST_CASE("small instances solve to their known objectives") {
  for (const char* name :
       {"hs6", "hs7", "hs35", "hs48", "rosenbrock-box", "dup-rows",
        "redundant-circle", "mpcc-basic", "mpcc-eq", "mpcc-sep-10"}) {
    CAPTURE(std::string(name));
    Model mdl(build_instance(name));
    const SolveReport rep = solve(mdl, {});
    CHECK(rep.status == SolveStatus::Optimal);
    const InstanceInfo info = instance_info(name);
    REQUIRE(info.known_objective.has_value());
    CHECK(close_to(rep.objective, *info.known_objective, 1e-5));
    CHECK(rep.primal_feas <= 1e-6);
    CHECK(rep.kkt_residual <= 1e-6);
    CHECK(rep.mu_final <= 1e-6);
  }
}

TEST_CASE("planted quadratic programs recover their optima") {
  for (const char* name : {"convex-qp-50", "ncvx-qp-50"}) {
    CAPTURE(std::string(name));
    Model mdl(build_instance(name));
    const SolveReport rep = solve(mdl, {});
    CHECK(rep.status == SolveStatus::Optimal);
    const InstanceInfo info = instance_info(name);
    CHECK(close_to(rep.objective, *info.known_objective, 1e-6));
  }
}

TEST_CASE("all kkt forms reach the same optimum") {
  for (KktForm form : {KktForm::K2, KktForm::K2r, KktForm::K1s}) {
    CAPTURE(kkt_form_name(form));
    SolverOptions opt;
    opt.kkt_form = form;
    {
      Model mdl(build_instance("hs7"));
      const SolveReport rep = solve(mdl, opt);
      CHECK(rep.status == SolveStatus::Optimal);
      CHECK(close_to(rep.objective, -std::sqrt(3.0), 1e-6));
    }
    {
      Model mdl(build_instance("opf-toy-30"));
      const SolveReport rep = solve(mdl, opt);
      CHECK(rep.status == SolveStatus::Optimal);
      CHECK(std::abs(rep.objective) <= 1e-5);
    }
  }
}

TEST_CASE("infeasible instances are flagged") {
  for (const char* name : {"infeas-circle", "infeas-qp"}) {
    CAPTURE(std::string(name));
    Model mdl(build_instance(name));
    const SolveReport rep = solve(mdl, {});
    CHECK(rep.status == SolveStatus::Infeasible);
    CHECK(rep.rho_final == 1e14);
  }
}

TEST_CASE("iteration limits are reported") {
  {
    SolverOptions opt;
    opt.max_outer = 1;
    Model mdl(build_instance("hs7"));
    const SolveReport rep = solve(mdl, opt);
    CHECK(rep.status == SolveStatus::IterationLimit);
    CHECK(rep.outer_iters == 1);
  }
  {
    SolverOptions opt;
    opt.max_inner = 3;
    Model mdl(build_instance("hs7"));
    const SolveReport rep = solve(mdl, opt);
    CHECK(rep.status == SolveStatus::IterationLimit);
    CHECK(rep.inner_iters <= 3);
  }
}

TEST_CASE("solves are deterministic") {
  auto run = [] {
    Model mdl(build_instance("ncvx-qp-50"));
    return solve(mdl, {});
  };
  const SolveReport a = run();
  const SolveReport b = run();
  CHECK(a.outer_iters == b.outer_iters);
  CHECK(a.inner_iters == b.inner_iters);
  CHECK(a.log.size() == b.log.size());
  REQUIRE(a.x.size() == b.x.size());
  CHECK((a.x.array() == b.x.array()).all());
}

TEST_CASE("log rows trace outer entries and accepted steps") {
  Model mdl(build_instance("hs35"));
  const SolveReport rep = solve(mdl, {});
  REQUIRE(rep.status == SolveStatus::Optimal);
  int entries = 0, steps = 0, last_outer = -1, last_inner = 0;
  for (const LogRow& row : rep.log) {
    if (row.k_inner == 0) {
      ++entries;
      CHECK(row.k_outer == last_outer + 1);
      last_outer = row.k_outer;
      last_inner = 0;
    } else {
      ++steps;
      CHECK(row.k_outer == last_outer);
      CHECK(row.k_inner == last_inner + 1);
      last_inner = row.k_inner;
      CHECK(row.alpha > 0.0);
      CHECK(row.alpha <= 1.0);
    }
    CHECK(row.mu > 0.0);
    CHECK(row.rho >= 100.0);
  }
  CHECK(entries == rep.outer_iters);
  CHECK(steps == rep.inner_iters);
  CHECK(rep.solve_seconds > 0.0);
}

TEST_CASE("gradient scaling tames a badly scaled instance") {
  NcoProblem p;
  p.name = "steep";
  p.n = 2;
  Ex a = wrap(p.graph, p.graph.variable(0));
  Ex b = wrap(p.graph, p.graph.variable(1));
  p.objective = (lit(p.graph, 1e6) * sq(a - lit(p.graph, 1.0))).id;
  p.eq.push_back((lit(p.graph, 1e3) * (b - a)).id);
  p.lb = dvec::Constant(2, -kInf);
  p.ub = dvec::Constant(2, kInf);
  p.start = dvec::Zero(2);
  Model mdl(p);
  const SolveReport rep = solve(mdl, {});
  CHECK(rep.status == SolveStatus::Optimal);
  CHECK(std::abs(rep.objective) <= 1e-4);
  CHECK(std::abs(rep.x[0] - 1.0) <= 1e-4);
  CHECK(std::abs(rep.x[1] - 1.0) <= 1e-4);

  SolverOptions raw;
  raw.scaling = false;
  const SolveReport rep2 = solve(mdl, raw);
  CHECK(rep2.status == SolveStatus::Optimal);
  CHECK(std::abs(rep2.objective) <= 1e-4);
}

TEST_CASE("extrapolation is exercised on smooth instances") {
  Model mdl(build_instance("hs48"));
  const SolveReport rep = solve(mdl, {});
  REQUIRE(rep.status == SolveStatus::Optimal);
  CHECK(rep.extrapolation_accepts >= 1);
}

}  // TEST_SUITE
