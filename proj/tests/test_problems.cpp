#include <doctest.h>

#include <Eigen/Dense>
#include <cmath>
#include <cstdio>
#include <ncl/instance_io.hpp>
#include <ncl/model.hpp>
#include <ncl/problems.hpp>

#include "oracles.hpp"

using ncl::dvec;
using ncl::Model;
using ncl::NcoProblem;

namespace {

oracle::dmat dense_jacobian(const Model& m, const dvec& t) {
  auto ws = m.make_workspace();
  std::vector<double> jv;
  m.eval_jacobian(t, ws, jv);
  const auto& jp = m.jacobian_pattern();
  oracle::dmat J = oracle::dmat::Zero(jp.rows, jp.cols);
  for (int i = 0; i < jp.rows; ++i)
    for (int p = jp.ptr[i]; p < jp.ptr[i + 1]; ++p) J(i, jp.idx[p]) = jv[p];
  return J;
}

oracle::dmat dense_obj_hessian(const Model& m, const dvec& t) {
  auto ws = m.make_workspace();
  std::vector<double> hv;
  m.eval_lag_hessian(t, 1.0, dvec::Zero(m.num_cons()), ws, hv);
  const auto& hp = m.hessian_pattern();
  oracle::dmat H = oracle::dmat::Zero(hp.n, hp.n);
  for (int j = 0; j < hp.n; ++j)
    for (int p = hp.ptr[j]; p < hp.ptr[j + 1]; ++p) {
      H(hp.idx[p], j) = hv[p];
      H(j, hp.idx[p]) = hv[p];
    }
  return H;
}

// Recover the planted QP optimum from model-extracted data alone by solving
// the dense KKT system [H J^T; J 0] [t; y] = [-g0; -c0].
double qp_optimum_via_kkt(const Model& m) {
  const int n = m.num_vars(), meq = m.num_cons();
  auto ws = m.make_workspace();
  const dvec t0 = dvec::Zero(n);
  dvec g0, c0;
  m.eval_gradient(t0, ws, g0);
  m.eval_constraints(t0, ws, c0);
  const oracle::dmat H = dense_obj_hessian(m, t0);
  const oracle::dmat J = dense_jacobian(m, t0);
  oracle::dmat K = oracle::dmat::Zero(n + meq, n + meq);
  K.topLeftCorner(n, n) = H;
  K.topRightCorner(n, meq) = J.transpose();
  K.bottomLeftCorner(meq, n) = J;
  dvec rhs(n + meq);
  rhs.head(n) = -g0;
  rhs.tail(meq) = -c0;
  const dvec sol = K.fullPivLu().solve(rhs);
  return m.eval_objective(sol.head(n), ws);
}

void check_fd_at_start(const std::string& name) {
  Model m(ncl::build_instance(name));
  auto ws = m.make_workspace();
  dvec t = m.start();
  for (int i = 0; i < t.size(); ++i) t[i] += 0.01 * (i % 3) + 0.003;
  auto f = [&](const dvec& x) { return m.eval_objective(x, ws); };
  dvec g;
  m.eval_gradient(t, ws, g);
  const dvec g_fd = oracle::fd_gradient(f, t);
  const double gs = std::max(1.0, g_fd.lpNorm<Eigen::Infinity>());
  CHECK((g - g_fd).lpNorm<Eigen::Infinity>() <= 2e-5 * gs);

  const oracle::dmat J = dense_jacobian(m, t);
  for (int r = 0; r < m.num_cons(); ++r) {
    auto cr = [&](const dvec& x) {
      dvec c;
      m.eval_constraints(x, ws, c);
      return c[r];
    };
    const dvec row_fd = oracle::fd_gradient(cr, t);
    const double rs = std::max(1.0, row_fd.lpNorm<Eigen::Infinity>());
    CHECK((J.row(r).transpose() - row_fd).lpNorm<Eigen::Infinity>() <=
          2e-5 * rs);
  }
}

}  // namespace

TEST_SUITE("problems") {

TEST_CASE("registry lists every family") {
  const auto names = ncl::instance_names();
  CHECK(names.size() == 20);
  CHECK(ncl::has_instance("hs6"));
  CHECK(ncl::has_instance("opf-toy-1000"));
  CHECK(!ncl::has_instance("nope"));
  CHECK_THROWS_AS(ncl::build_instance("nope"), std::invalid_argument);
  int infeasible = 0, known = 0;
  for (const auto& nm : names) {
    const auto info = ncl::instance_info(nm);
    CHECK(info.name == nm);
    if (info.expect_infeasible) ++infeasible;
    if (info.known_objective) ++known;
  }
  CHECK(infeasible == 2);
  CHECK(known == 18);
}

TEST_CASE("instances compile and metadata matches the model") {
  for (const auto& nm : ncl::instance_names()) {
    const auto info = ncl::instance_info(nm);
    Model m(ncl::build_instance(nm));
    CHECK(m.num_vars() == info.n);
    CHECK(m.num_eq() == info.m_eq);
    CHECK(m.num_ineq() == info.m_ineq);
    CHECK(m.start().size() == info.n);
  }
}

TEST_CASE("classic optima recorded exactly") {
  CHECK(*ncl::instance_info("hs6").known_objective == 0.0);
  CHECK(*ncl::instance_info("hs7").known_objective ==
        doctest::Approx(-std::sqrt(3.0)).epsilon(1e-15));
  CHECK(*ncl::instance_info("hs35").known_objective ==
        doctest::Approx(1.0 / 9.0).epsilon(1e-15));
  CHECK(*ncl::instance_info("dup-rows").known_objective == 0.5);
  CHECK(*ncl::instance_info("redundant-circle").known_objective == 1.0);
  CHECK(*ncl::instance_info("mpcc-sep-50").known_objective == 25.0);
}

TEST_CASE("generated data is deterministic") {
  CHECK(*ncl::instance_info("convex-qp-50").known_objective ==
        doctest::Approx(-17.053398025827619).epsilon(1e-15));
  CHECK(*ncl::instance_info("ncvx-qp-200").known_objective ==
        doctest::Approx(216.04245830487457).epsilon(1e-15));
  const std::string a = ncl::format_instance(ncl::build_instance("opf-toy-30"));
  const std::string b = ncl::format_instance(ncl::build_instance("opf-toy-30"));
  CHECK(a == b);
}

TEST_CASE("planted qp optimum is recovered by an independent kkt solve") {
  for (const char* nm : {"convex-qp-50", "ncvx-qp-50", "convex-qp-200"}) {
    const auto info = ncl::instance_info(nm);
    Model m(ncl::build_instance(nm));
    const double f = qp_optimum_via_kkt(m);
    CHECK(f == doctest::Approx(*info.known_objective).epsilon(1e-9));
  }
}

TEST_CASE("qp curvature classes") {
  Model mc(ncl::build_instance("convex-qp-50"));
  const auto eic = oracle::eigen_inertia(
      dense_obj_hessian(mc, dvec::Zero(mc.num_vars())), 1e-10);
  CHECK(eic[0] == 50);
  CHECK(eic[1] == 0);

  Model mn(ncl::build_instance("ncvx-qp-50"));
  const oracle::dmat H = dense_obj_hessian(mn, dvec::Zero(mn.num_vars()));
  const auto ein = oracle::eigen_inertia(H, 1e-10);
  CHECK(ein[1] > 0);  // indefinite in the full space
  // but positive definite on the constraint null space
  const oracle::dmat J = dense_jacobian(mn, dvec::Zero(mn.num_vars()));
  Eigen::FullPivLU<oracle::dmat> lu(J);
  const oracle::dmat Z = lu.kernel();
  const oracle::dmat R = Z.transpose() * H * Z;
  Eigen::SelfAdjointEigenSolver<oracle::dmat> es(R);
  CHECK(es.eigenvalues().minCoeff() > 0.0);
}

TEST_CASE("derivatives of representative instances pass finite differences") {
  for (const char* nm :
       {"hs6", "hs7", "hs35", "hs48", "rosenbrock-box", "redundant-circle",
        "mpcc-basic", "opf-toy-30"})
    check_fd_at_start(nm);
}

TEST_CASE("opf structure") {
  const auto info = ncl::instance_info("opf-toy-30");
  CHECK(info.n == 30);
  CHECK(info.m_eq == 15);
  CHECK(info.m_ineq == 18);  // ring plus three chords
  Model m(ncl::build_instance("opf-toy-30"));
  // reference angle pinned by an equal-bound box
  CHECK(m.problem().lb[0] == 0.0);
  CHECK(m.problem().ub[0] == 0.0);
  // objective only involves injections: gradient in angles is zero
  auto ws = m.make_workspace();
  dvec g;
  m.eval_gradient(m.start(), ws, g);
  CHECK(g.head(15).lpNorm<Eigen::Infinity>() == 0.0);
  CHECK(m.eval_objective(m.start(), ws) >= 0.0);
}

TEST_CASE("round trip through the text format preserves values") {
  oracle::Rng rng(7);
  for (const auto& nm : ncl::instance_names()) {
    if (nm == "opf-toy-1000") continue;  // covered by the 200-bus twin
    const NcoProblem orig = ncl::build_instance(nm);
    const NcoProblem back = ncl::parse_instance_text(
        ncl::format_instance(orig), "fallback");
    Model m1(ncl::build_instance(nm)), m2(std::move(back));
    REQUIRE(m1.num_vars() == m2.num_vars());
    REQUIRE(m1.num_cons() == m2.num_cons());
    CHECK(m2.name() == nm);
    auto w1 = m1.make_workspace(), w2 = m2.make_workspace();
    for (int trial = 0; trial < 3; ++trial) {
      dvec t = m1.start();
      for (int i = 0; i < t.size(); ++i) t[i] += rng.uniform(-0.1, 0.1);
      const double f1 = m1.eval_objective(t, w1);
      const double f2 = m2.eval_objective(t, w2);
      CHECK(std::abs(f1 - f2) <= 1e-10 * std::max(1.0, std::abs(f1)));
      dvec c1, c2;
      m1.eval_constraints(t, w1, c1);
      m2.eval_constraints(t, w2, c2);
      CHECK((c1 - c2).lpNorm<Eigen::Infinity>() <=
            1e-10 * std::max(1.0, c1.lpNorm<Eigen::Infinity>()));
    }
    // bounds and starts survive as well
    CHECK((m1.problem().lb.array() == m2.problem().lb.array()).all());
    CHECK((m1.problem().ub.array() == m2.problem().ub.array()).all());
    CHECK((m1.start() - m2.start()).norm() == 0.0);
  }
}

TEST_CASE("parser handles every operator") {
  const char* text =
      "name ops\n"
      "var x 0.1 10 1.3\n"
      "var y 0.1 10 0.7\n"
      "objective add mul x y div sin x cos y\n"
      "eq 1 add pow x 2 neg inv y\n"
      "eq 0 sub exp x add log y sqrt x\n"
      "range -1 1 sub x y\n";
  const NcoProblem p = ncl::parse_instance_text(text, "fb");
  Model m(p);
  CHECK(m.name() == "ops");
  auto ws = m.make_workspace();
  dvec t(2);
  t << 1.3, 0.7;
  const double x = 1.3, y = 0.7;
  CHECK(m.eval_objective(t, ws) ==
        doctest::Approx(x * y + std::sin(x) / std::cos(y)).epsilon(1e-14));
  dvec c;
  m.eval_constraints(t, ws, c);
  CHECK(c[0] == doctest::Approx(x * x - 1.0 / y - 1.0).epsilon(1e-14));
  CHECK(c[1] ==
        doctest::Approx(std::exp(x) - (std::log(y) + std::sqrt(x)))
            .epsilon(1e-14));
  CHECK(m.problem().ineq[0].lower == -1.0);
  CHECK(m.start()[1] == 0.7);
}

TEST_CASE("parser fills missing starts with the default rule") {
  const char* text =
      "var a 0 4\n"
      "var b -inf inf 2.5\n"
      "objective add a b\n";
  const NcoProblem p = ncl::parse_instance_text(text, "fb");
  CHECK(p.name == "fb");
  REQUIRE(p.start.size() == 2);
  CHECK(p.start[0] == 2.0);
  CHECK(p.start[1] == 2.5);
}

TEST_CASE("parser reports the offending line and field") {
  auto err = [](const char* text) {
    try {
      ncl::parse_instance_text(text, "fb");
    } catch (const std::runtime_error& e) {
      return std::string(e.what());
    }
    return std::string("no error");
  };
  CHECK(err("var x lo 1\nobjective x\n").find("line 1") != std::string::npos);
  CHECK(err("var x lo 1\nobjective x\n").find("var lower") !=
        std::string::npos);
  CHECK(err("frob x\n").find("unknown directive 'frob'") != std::string::npos);
  CHECK(err("var x 0 1\nvar x 0 1\nobjective x\n").find("duplicate") !=
        std::string::npos);
  CHECK(err("var x 0 1\nobjective x y\n").find("trailing token 'y'") !=
        std::string::npos);
  CHECK(err("var x 0 1\n") == "missing objective directive");
  CHECK(err("var x 2 1\nobjective x\n").find("lower bound above") !=
        std::string::npos);
  CHECK(err("var x 0 1\nobjective add x\n").find("ends early") !=
        std::string::npos);
  CHECK(err("var x 0 1\nobjective z\n").find("unknown token 'z'") !=
        std::string::npos);
  CHECK(err("var x 0 1\nobjective x\neq x\n").find("eq: expected") !=
        std::string::npos);
}

TEST_CASE("comments and blank lines are ignored") {
  const char* text =
      "# header comment\n"
      "\n"
      "name c  # trailing comment\n"
      "var x -1 1  # bounds\n"
      "objective pow x 2\n";
  const NcoProblem p = ncl::parse_instance_text(text, "fb");
  CHECK(p.name == "c");
  CHECK(p.n == 1);
}

TEST_CASE("sample instance files load and match builtins") {
  const std::string dir = std::string(NCL_SOURCE_DIR) + "/instances/";
  const NcoProblem file_p = ncl::load_instance_file(dir + "hs6.nco");
  Model mf(file_p), mb(ncl::build_instance("hs6"));
  CHECK(mf.name() == "hs6");
  auto wf = mf.make_workspace(), wb = mb.make_workspace();
  oracle::Rng rng(3);
  for (int trial = 0; trial < 5; ++trial) {
    dvec t(2);
    t << rng.uniform(-2, 2), rng.uniform(-2, 2);
    CHECK(mf.eval_objective(t, wf) ==
          doctest::Approx(mb.eval_objective(t, wb)).epsilon(1e-12));
    dvec cf, cb;
    mf.eval_constraints(t, wf, cf);
    mb.eval_constraints(t, wb, cb);
    CHECK(cf[0] == doctest::Approx(cb[0]).epsilon(1e-12));
  }
  const NcoProblem mp = ncl::load_instance_file(dir + "mpcc-basic.nco");
  CHECK(mp.ineq.size() == 1);
  const NcoProblem cl = ncl::load_instance_file(dir + "circle-line.nco");
  CHECK(cl.name == "circle-line");
  CHECK(cl.eq.size() == 1);
  CHECK(cl.ineq.size() == 1);
}

TEST_CASE("file writer round trips through disk") {
  const NcoProblem p = ncl::build_instance("hs35");
  const std::string tmp = "hs35_rt.nco";
  ncl::write_instance_file(p, tmp);
  const NcoProblem q = ncl::load_instance_file(tmp);
  std::remove(tmp.c_str());
  CHECK(q.name == "hs35");
  Model m1(p), m2(q);
  auto w1 = m1.make_workspace(), w2 = m2.make_workspace();
  const dvec t = dvec::Constant(3, 0.7);
  CHECK(m1.eval_objective(t, w1) ==
        doctest::Approx(m2.eval_objective(t, w2)).epsilon(1e-14));
}

}  // TEST_SUITE
