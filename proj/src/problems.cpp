#include <ncl/problems.hpp>

#include <array>
#include <cmath>
#include <cstdint>
#include <functional>
#include <random>
#include <stdexcept>
#include <tuple>

namespace ncl {

namespace {

// Fixed bit-to-double mapping so generated data is identical across
// platforms and standard library versions.
struct Rng {
  std::mt19937_64 gen;
  explicit Rng(std::uint64_t seed) : gen(seed) {}
  double uniform(double lo, double hi) {
    const double u = static_cast<double>(gen() >> 11) * 0x1.0p-53;
    return lo + (hi - lo) * u;
  }
};

struct Built {
  NcoProblem prob;
  std::string family;
  bool infeasible = false;
  std::optional<double> known;
};

Ex var(NcoProblem& p, int i) { return wrap(p.graph, p.graph.variable(i)); }

void set_box(NcoProblem& p, double lo, double hi) {
  p.lb = dvec::Constant(p.n, lo);
  p.ub = dvec::Constant(p.n, hi);
}

Built hs6() {
  Built b;
  NcoProblem& p = b.prob;
  p.name = "hs6";
  p.n = 2;
  Ex t1 = var(p, 0), t2 = var(p, 1);
  p.objective = sq(1.0 - t1).id;
  p.eq.push_back((10.0 * (t2 - sq(t1))).id);
  p.start = dvec(2);
  p.start << -1.2, 1.0;
  b.family = "classic";
  b.known = 0.0;
  return b;
}

Built hs7() {
  Built b;
  NcoProblem& p = b.prob;
  p.name = "hs7";
  p.n = 2;
  Ex t1 = var(p, 0), t2 = var(p, 1);
  p.objective = (log(1.0 + sq(t1)) - t2).id;
  p.eq.push_back((sq(1.0 + sq(t1)) + sq(t2) - 4.0).id);
  p.start = dvec(2);
  p.start << 2.0, 2.0;
  b.family = "classic";
  b.known = -std::sqrt(3.0);
  return b;
}

Built hs35() {
  Built b;
  NcoProblem& p = b.prob;
  p.name = "hs35";
  p.n = 3;
  Ex t1 = var(p, 0), t2 = var(p, 1), t3 = var(p, 2);
  p.objective = (9.0 - 8.0 * t1 - 6.0 * t2 - 4.0 * t3 + 2.0 * sq(t1) +
                 2.0 * sq(t2) + sq(t3) + 2.0 * t1 * t2 + 2.0 * t1 * t3)
                    .id;
  p.ineq.push_back({(t1 + t2 + 2.0 * t3).id, -kInf, 3.0});
  set_box(p, 0.0, kInf);
  p.start = dvec::Constant(3, 0.5);
  b.family = "classic";
  b.known = 1.0 / 9.0;
  return b;
}

Built hs48() {
  Built b;
  NcoProblem& p = b.prob;
  p.name = "hs48";
  p.n = 5;
  Ex t1 = var(p, 0), t2 = var(p, 1), t3 = var(p, 2);
  Ex t4 = var(p, 3), t5 = var(p, 4);
  p.objective = (sq(t1 - 1.0) + sq(t2 - t3) + sq(t4 - t5)).id;
  p.eq.push_back((t1 + t2 + t3 + t4 + t5 - 5.0).id);
  p.eq.push_back((t3 - 2.0 * (t4 + t5) + 3.0).id);
  p.start = dvec(5);
  p.start << 3.0, 5.0, -3.0, 2.0, -2.0;
  b.family = "classic";
  b.known = 0.0;
  return b;
}

Built rosenbrock_box() {
  Built b;
  NcoProblem& p = b.prob;
  p.name = "rosenbrock-box";
  const int n = 6;
  p.n = n;
  std::vector<int> terms;
  for (int i = 0; i + 1 < n; ++i) {
    Ex a = var(p, i), c = var(p, i + 1);
    terms.push_back((100.0 * sq(c - sq(a))).id);
    terms.push_back(sq(1.0 - a).id);
  }
  p.objective = p.graph.sum(terms);
  set_box(p, -2.0, 2.0);  // default start: box midpoint, one basin from the
                          // global minimizer at e
  b.family = "bound";
  b.known = 0.0;
  return b;
}

// Equality-constrained QP with the solution planted via the stationarity
// condition: g = A^T y* - H t*, b = A t*. H = Q (tridiagonal SPD) for the
// convex variant; H = Q - kappa A^T A for the nonconvex one, which is
// indefinite yet SPD on the null space of A, so t* stays the unique
// minimizer on the feasible set and the optimal value is computable.
Built planted_qp(const char* name, int n, bool convex, std::uint64_t seed) {
  const int m = n / 2;
  const double kappa = convex ? 0.0 : 5.0;
  Rng rng(seed);

  std::vector<double> qdiag(n), qoff(n - 1);
  for (int i = 0; i < n; ++i) qdiag[i] = rng.uniform(2.0, 3.0);
  for (int i = 0; i + 1 < n; ++i) qoff[i] = rng.uniform(-0.5, 0.5);

  std::vector<std::array<int, 3>> acol(m);
  std::vector<std::array<double, 3>> aval(m);
  for (int i = 0; i < m; ++i) {
    acol[i] = {2 * i, 2 * i + 1, (2 * i + 5) % n};
    for (int k = 0; k < 3; ++k) aval[i][k] = rng.uniform(0.5, 1.5);
  }

  dvec tstar(n), ystar(m);
  for (int j = 0; j < n; ++j) tstar[j] = rng.uniform(-1.0, 1.0);
  for (int i = 0; i < m; ++i) ystar[i] = rng.uniform(-1.0, 1.0);

  // H as lower-triangle triplets (i >= j)
  std::vector<std::tuple<int, int, double>> htrip;
  for (int j = 0; j < n; ++j) htrip.emplace_back(j, j, qdiag[j]);
  for (int j = 0; j + 1 < n; ++j) htrip.emplace_back(j + 1, j, qoff[j]);
  if (!convex) {
    for (int i = 0; i < m; ++i)
      for (int a = 0; a < 3; ++a)
        for (int c = 0; c < 3; ++c) {
          const int ra = acol[i][a], rc = acol[i][c];
          if (ra >= rc)
            htrip.emplace_back(ra, rc, -kappa * aval[i][a] * aval[i][c]);
        }
  }
  // coalesce duplicates
  std::sort(htrip.begin(), htrip.end(),
            [](const auto& x, const auto& y) {
              return std::tie(std::get<0>(x), std::get<1>(x)) <
                     std::tie(std::get<0>(y), std::get<1>(y));
            });
  std::vector<std::tuple<int, int, double>> hcoal;
  for (const auto& t : htrip) {
    if (!hcoal.empty() && std::get<0>(hcoal.back()) == std::get<0>(t) &&
        std::get<1>(hcoal.back()) == std::get<1>(t))
      std::get<2>(hcoal.back()) += std::get<2>(t);
    else
      hcoal.push_back(t);
  }

  auto hmul = [&](const dvec& x) {
    dvec y = dvec::Zero(n);
    for (const auto& [i, j, v] : hcoal) {
      y[i] += v * x[j];
      if (i != j) y[j] += v * x[i];
    }
    return y;
  };
  const dvec htstar = hmul(tstar);
  dvec g = -htstar;
  dvec bvec(m);
  for (int i = 0; i < m; ++i) {
    double bi = 0.0;
    for (int k = 0; k < 3; ++k) {
      g[acol[i][k]] += aval[i][k] * ystar[i];
      bi += aval[i][k] * tstar[acol[i][k]];
    }
    bvec[i] = bi;
  }
  const double fstar = 0.5 * tstar.dot(htstar) + g.dot(tstar);

  Built b;
  NcoProblem& p = b.prob;
  p.name = name;
  p.n = n;
  std::vector<int> terms;
  for (const auto& [i, j, v] : hcoal) {
    if (v == 0.0) continue;
    if (i == j)
      terms.push_back((0.5 * v * sq(var(p, i))).id);
    else
      terms.push_back((v * var(p, i) * var(p, j)).id);
  }
  for (int j = 0; j < n; ++j)
    if (g[j] != 0.0) terms.push_back((g[j] * var(p, j)).id);
  p.objective = p.graph.sum(terms);
  for (int i = 0; i < m; ++i) {
    std::vector<int> row;
    for (int k = 0; k < 3; ++k)
      row.push_back((aval[i][k] * var(p, acol[i][k])).id);
    row.push_back(p.graph.constant(-bvec[i]));
    p.eq.push_back(p.graph.sum(row));
  }
  p.start = dvec::Zero(n);
  b.family = "qp";
  b.known = fstar;
  return b;
}

Built dup_rows() {
  Built b;
  NcoProblem& p = b.prob;
  p.name = "dup-rows";
  p.n = 2;
  p.objective = (sq(var(p, 0)) + sq(var(p, 1))).id;
  for (int k = 0; k < 2; ++k)
    p.eq.push_back((var(p, 0) + var(p, 1) - 1.0).id);
  p.start = dvec(2);
  p.start << 2.0, 0.0;
  b.family = "degenerate";
  b.known = 0.5;
  return b;
}

Built redundant_circle() {
  Built b;
  NcoProblem& p = b.prob;
  p.name = "redundant-circle";
  p.n = 2;
  Ex t1 = var(p, 0), t2 = var(p, 1);
  p.objective = (sq(t1) + sq(t2)).id;
  p.eq.push_back((sq(t1 - 2.0) + sq(t2) - 1.0).id);
  p.eq.push_back((2.0 * sq(t1 - 2.0) + 2.0 * sq(t2) - 2.0).id);
  p.start = dvec(2);
  p.start << 3.0, 1.0;
  b.family = "degenerate";
  b.known = 1.0;
  return b;
}

Built mpcc_basic() {
  Built b;
  NcoProblem& p = b.prob;
  p.name = "mpcc-basic";
  p.n = 2;
  Ex t1 = var(p, 0), t2 = var(p, 1);
  p.objective = (sq(t1 - 1.0) + sq(t2 - 1.0)).id;
  p.ineq.push_back({(t1 * t2).id, -kInf, 0.0});
  set_box(p, 0.0, kInf);
  p.start = dvec::Constant(2, 1.0);
  b.family = "mpcc";
  b.known = 1.0;
  return b;
}

Built mpcc_eq() {
  Built b;
  NcoProblem& p = b.prob;
  p.name = "mpcc-eq";
  p.n = 2;
  Ex t1 = var(p, 0), t2 = var(p, 1);
  p.objective = (sq(t1 - 1.0) + sq(t2 - 1.0)).id;
  p.eq.push_back((t1 * t2).id);
  set_box(p, 0.0, kInf);
  p.start = dvec::Constant(2, 0.5);
  b.family = "mpcc";
  b.known = 1.0;
  return b;
}

Built mpcc_sep(const char* name, int pairs) {
  Built b;
  NcoProblem& p = b.prob;
  p.name = name;
  p.n = 2 * pairs;
  std::vector<int> terms;
  for (int i = 0; i < pairs; ++i) {
    Ex a = var(p, 2 * i), c = var(p, 2 * i + 1);
    terms.push_back(sq(a - 1.0).id);
    terms.push_back(sq(c - 1.0).id);
    p.eq.push_back((a * c).id);
  }
  p.objective = p.graph.sum(terms);
  set_box(p, 0.0, kInf);
  p.start = dvec::Constant(p.n, 0.5);
  b.family = "mpcc";
  b.known = static_cast<double>(pairs);
  return b;
}

Built infeas_circle() {
  Built b;
  NcoProblem& p = b.prob;
  p.name = "infeas-circle";
  p.n = 2;
  Ex t1 = var(p, 0), t2 = var(p, 1);
  p.objective = (t1 + t2).id;
  p.eq.push_back((sq(t1) + sq(t2) - 1.0).id);
  p.eq.push_back((t1 + t2 - 3.0).id);
  p.start = dvec::Constant(2, 1.0);
  b.family = "infeasible";
  b.infeasible = true;
  return b;
}

Built infeas_qp() {
  Built b;
  NcoProblem& p = b.prob;
  p.name = "infeas-qp";
  p.n = 2;
  Ex t1 = var(p, 0), t2 = var(p, 1);
  p.objective = (sq(t1) + sq(t2)).id;
  p.eq.push_back((t1 + t2 - 1.0).id);
  p.eq.push_back((t1 + t2 - 2.0).id);
  p.start = dvec::Zero(2);
  b.family = "infeasible";
  b.infeasible = true;
  return b;
}

// Ring network with chords. Variables are bus angles followed by bus
// injections; balance equalities couple injections to sine line flows and
// range inequalities cap each flow. Demands are chosen so a reference
// angle/injection profile is feasible, and the objective penalizes squared
// deviation from that profile, so the optimal value is exactly zero.
Built opf_toy(const char* name, int buses, std::uint64_t seed) {
  const int nbus = buses;
  Rng rng(seed);

  std::vector<std::pair<int, int>> edges;
  for (int i = 0; i < nbus; ++i) edges.emplace_back(i, (i + 1) % nbus);
  if (nbus > 10)
    for (int i = 0; i < nbus; i += 5) edges.emplace_back(i, (i + 3) % nbus);
  const int ne = static_cast<int>(edges.size());

  std::vector<double> susc(ne), theta_ref(nbus), inj_ref(nbus), weight(nbus);
  for (int e = 0; e < ne; ++e) susc[e] = rng.uniform(1.0, 3.0);
  theta_ref[0] = 0.0;
  for (int i = 1; i < nbus; ++i) theta_ref[i] = rng.uniform(-0.3, 0.3);
  for (int i = 0; i < nbus; ++i) inj_ref[i] = rng.uniform(1.0, 2.0);
  for (int i = 0; i < nbus; ++i) weight[i] = rng.uniform(0.5, 2.0);

  std::vector<double> demand(nbus);
  for (int i = 0; i < nbus; ++i) demand[i] = inj_ref[i];
  for (int e = 0; e < ne; ++e) {
    const auto [i, j] = edges[e];
    const double f = susc[e] * std::sin(theta_ref[i] - theta_ref[j]);
    demand[i] -= f;
    demand[j] += f;
  }

  Built b;
  NcoProblem& p = b.prob;
  p.name = name;
  p.n = 2 * nbus;  // theta_0..theta_{nbus-1}, then injections
  std::vector<Ex> theta, inj;
  for (int i = 0; i < nbus; ++i) theta.push_back(var(p, i));
  for (int i = 0; i < nbus; ++i) inj.push_back(var(p, nbus + i));

  std::vector<int> flow_ids(ne);
  for (int e = 0; e < ne; ++e) {
    const auto [i, j] = edges[e];
    flow_ids[e] = (susc[e] * sin(theta[i] - theta[j])).id;
  }

  std::vector<std::vector<int>> balance(nbus);
  for (int i = 0; i < nbus; ++i) {
    balance[i].push_back(inj[i].id);
    balance[i].push_back(p.graph.constant(-demand[i]));
  }
  for (int e = 0; e < ne; ++e) {
    const auto [i, j] = edges[e];
    balance[i].push_back(p.graph.neg(flow_ids[e]));
    balance[j].push_back(flow_ids[e]);
  }
  for (int i = 0; i < nbus; ++i) p.eq.push_back(p.graph.sum(balance[i]));

  for (int e = 0; e < ne; ++e)
    p.ineq.push_back({flow_ids[e], -0.8 * susc[e], 0.8 * susc[e]});

  std::vector<int> obj;
  for (int i = 0; i < nbus; ++i)
    obj.push_back((weight[i] * sq(inj[i] - inj_ref[i])).id);
  p.objective = p.graph.sum(obj);

  p.lb = dvec::Constant(p.n, -1.0);
  p.ub = dvec::Constant(p.n, 1.0);
  p.lb[0] = p.ub[0] = 0.0;  // reference bus angle pinned
  for (int i = 0; i < nbus; ++i) {
    p.lb[nbus + i] = 0.0;
    p.ub[nbus + i] = 10.0;
  }
  p.start = dvec::Zero(p.n);
  for (int i = 0; i < nbus; ++i) p.start[nbus + i] = 1.5;
  b.family = "opf";
  b.known = 0.0;
  return b;
}

const std::vector<std::pair<std::string, std::function<Built()>>>& table() {
  static const std::vector<std::pair<std::string, std::function<Built()>>> t =
      {
          {"hs6", hs6},
          {"hs7", hs7},
          {"hs35", hs35},
          {"hs48", hs48},
          {"rosenbrock-box", rosenbrock_box},
          {"convex-qp-50",
           [] { return planted_qp("convex-qp-50", 50, true, 101); }},
          {"convex-qp-200",
           [] { return planted_qp("convex-qp-200", 200, true, 102); }},
          {"ncvx-qp-50",
           [] { return planted_qp("ncvx-qp-50", 50, false, 103); }},
          {"ncvx-qp-200",
           [] { return planted_qp("ncvx-qp-200", 200, false, 104); }},
          {"dup-rows", dup_rows},
          {"redundant-circle", redundant_circle},
          {"mpcc-basic", mpcc_basic},
          {"mpcc-eq", mpcc_eq},
          {"mpcc-sep-10", [] { return mpcc_sep("mpcc-sep-10", 5); }},
          {"mpcc-sep-50", [] { return mpcc_sep("mpcc-sep-50", 25); }},
          {"infeas-circle", infeas_circle},
          {"infeas-qp", infeas_qp},
          {"opf-toy-30", [] { return opf_toy("opf-toy-30", 15, 201); }},
          {"opf-toy-200", [] { return opf_toy("opf-toy-200", 100, 202); }},
          {"opf-toy-1000", [] { return opf_toy("opf-toy-1000", 500, 203); }},
      };
  return t;
}

Built make(const std::string& name) {
  for (const auto& [nm, fn] : table())
    if (nm == name) return fn();
  throw std::invalid_argument("unknown instance: " + name);
}

}  // namespace

std::vector<std::string> instance_names() {
  std::vector<std::string> out;
  for (const auto& [nm, fn] : table()) out.push_back(nm);
  return out;
}

bool has_instance(const std::string& name) {
  for (const auto& [nm, fn] : table())
    if (nm == name) return true;
  return false;
}

InstanceInfo instance_info(const std::string& name) {
  Built b = make(name);
  InstanceInfo info;
  info.name = b.prob.name;
  info.family = b.family;
  info.n = b.prob.n;
  info.m_eq = static_cast<int>(b.prob.eq.size());
  info.m_ineq = static_cast<int>(b.prob.ineq.size());
  info.expect_infeasible = b.infeasible;
  info.known_objective = b.known;
  return info;
}

NcoProblem build_instance(const std::string& name) {
  return std::move(make(name).prob);
}

}  // namespace ncl
