#include <ncl/model.hpp>

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <unordered_map>

namespace ncl {

namespace {

constexpr int kDegInf = 1 << 29;

int sat_add(int a, int b) { return (a >= kDegInf || b >= kDegInf) ? kDegInf : a + b; }

int sat_mul(int a, int e) {
  if (e == 0 || a == 0) return 0;
  if (a >= kDegInf) return kDegInf;
  const long long v = static_cast<long long>(a) * e;
  return v >= kDegInf ? kDegInf : static_cast<int>(v);
}

// Polynomial degree per node, kDegInf for transcendental dependence.
std::vector<int> node_degrees(const ExprGraph& g) {
  std::vector<int> deg(g.num_nodes(), 0);
  for (int id = 0; id < g.num_nodes(); ++id) {
    const ExprNode& n = g.node(id);
    const int* ch = g.children(id);
    switch (n.kind) {
      case ExprKind::Constant: deg[id] = 0; break;
      case ExprKind::Variable: deg[id] = 1; break;
      case ExprKind::Sum: {
        int d = 0;
        for (int k = 0; k < n.n_children; ++k) d = std::max(d, deg[ch[k]]);
        deg[id] = d;
        break;
      }
      case ExprKind::Product: deg[id] = sat_add(deg[ch[0]], deg[ch[1]]); break;
      case ExprKind::Neg: deg[id] = deg[ch[0]]; break;
      case ExprKind::Power: {
        const double p = n.aux;
        const bool int_p = p == std::floor(p) && std::abs(p) < 1e9;
        if (deg[ch[0]] == 0)
          deg[id] = 0;
        else if (int_p && p >= 0.0)
          deg[id] = sat_mul(deg[ch[0]], static_cast<int>(p));
        else
          deg[id] = kDegInf;
        break;
      }
      default: deg[id] = (deg[ch[0]] == 0) ? 0 : kDegInf; break;
    }
  }
  return deg;
}

// Reachable node ids in ascending (= topological) order.
std::vector<int> reach(const ExprGraph& g, int root, std::vector<char>& mark) {
  std::vector<int> out, stack{root};
  while (!stack.empty()) {
    const int id = stack.back();
    stack.pop_back();
    if (mark[id]) continue;
    mark[id] = 1;
    out.push_back(id);
    const ExprNode& n = g.node(id);
    const int* ch = g.children(id);
    for (int k = 0; k < n.n_children; ++k)
      if (!mark[ch[k]]) stack.push_back(ch[k]);
  }
  for (const int id : out) mark[id] = 0;
  std::sort(out.begin(), out.end());
  return out;
}

std::vector<int> vars_of(const ExprGraph& g, const std::vector<int>& tape) {
  std::vector<int> v;
  for (const int id : tape)
    if (g.node(id).kind == ExprKind::Variable) v.push_back(g.node(id).var);
  std::sort(v.begin(), v.end());
  v.erase(std::unique(v.begin(), v.end()), v.end());
  return v;
}

}  // namespace

Model::Model(NcoProblem p) : p_(std::move(p)) {
  const int n = p_.n;
  if (n < 0) throw std::invalid_argument("model: negative variable count");
  if (p_.graph.num_variables() > n)
    throw std::invalid_argument("model: expression references unknown variable");
  if (p_.lb.size() == 0) p_.lb = dvec::Constant(n, -kInf);
  if (p_.ub.size() == 0) p_.ub = dvec::Constant(n, kInf);
  if (p_.lb.size() != n || p_.ub.size() != n)
    throw std::invalid_argument("model: bound vector length mismatch");
  for (int i = 0; i < n; ++i)
    if (!(p_.lb[i] <= p_.ub[i]))
      throw std::invalid_argument("model: lb > ub");
  for (const auto& r : p_.ineq)
    if (!(r.lower <= r.upper))
      throw std::invalid_argument("model: inequality range empty");
  if (p_.objective < 0 || p_.objective >= p_.graph.num_nodes())
    throw std::invalid_argument("model: missing objective");

  if (p_.start.size() == n) {
    start_ = p_.start;
  } else {
    start_ = dvec::Zero(n);
    for (int i = 0; i < n; ++i) {
      const bool lf = std::isfinite(p_.lb[i]), uf = std::isfinite(p_.ub[i]);
      if (lf && uf)
        start_[i] = 0.5 * (p_.lb[i] + p_.ub[i]);
      else if (lf)
        start_[i] = p_.lb[i] + 1.0;
      else if (uf)
        start_[i] = p_.ub[i] - 1.0;
    }
  }

  const std::vector<int> deg = node_degrees(p_.graph);
  std::vector<char> mark(p_.graph.num_nodes(), 0);

  roots_.resize(1 + num_cons());
  roots_[0].node = p_.objective;
  for (int i = 0; i < num_eq(); ++i) roots_[1 + i].node = p_.eq[i];
  for (int j = 0; j < num_ineq(); ++j)
    roots_[1 + num_eq() + j].node = p_.ineq[j].expr;

  for (auto& r : roots_) {
    r.tape = reach(p_.graph, r.node, mark);
    r.vars = vars_of(p_.graph, r.tape);
    // additive elements: flatten nested sums
    std::vector<int> pending{r.node}, elems;
    while (!pending.empty()) {
      const int id = pending.back();
      pending.pop_back();
      const ExprNode& nd = p_.graph.node(id);
      if (nd.kind == ExprKind::Sum) {
        const int* ch = p_.graph.children(id);
        for (int k = 0; k < nd.n_children; ++k) pending.push_back(ch[k]);
      } else {
        elems.push_back(id);
      }
    }
    for (const int e : elems) {
      Element el;
      el.tape = reach(p_.graph, e, mark);
      el.vars = vars_of(p_.graph, el.tape);
      el.nonlinear = deg[e] >= 2;
      r.elements.push_back(std::move(el));
    }
  }

  // Jacobian pattern: row per constraint, columns are its variables.
  jpat_.rows = num_cons();
  jpat_.cols = n;
  jpat_.ptr.assign(jpat_.rows + 1, 0);
  for (int i = 0; i < jpat_.rows; ++i) {
    const auto& vars = roots_[1 + i].vars;
    jpat_.ptr[i + 1] = jpat_.ptr[i] + static_cast<int>(vars.size());
    jpat_.idx.insert(jpat_.idx.end(), vars.begin(), vars.end());
  }

  // Hessian pattern: cross products of each nonlinear element's variables.
  std::vector<std::pair<int, int>> pairs;  // (col j, row i), i >= j
  for (const auto& r : roots_)
    for (const auto& e : r.elements) {
      if (!e.nonlinear) continue;
      for (const int a : e.vars)
        for (const int b : e.vars)
          if (a >= b) pairs.emplace_back(b, a);
    }
  std::sort(pairs.begin(), pairs.end());
  pairs.erase(std::unique(pairs.begin(), pairs.end()), pairs.end());
  hpat_.n = n;
  hpat_.ptr.assign(n + 1, 0);
  hpat_.idx.resize(pairs.size());
  std::unordered_map<long long, int> slot;
  slot.reserve(pairs.size() * 2);
  for (size_t k = 0; k < pairs.size(); ++k) {
    hpat_.ptr[pairs[k].first + 1]++;
    hpat_.idx[k] = pairs[k].second;
    slot[static_cast<long long>(pairs[k].second) * n + pairs[k].first] =
        static_cast<int>(k);
  }
  for (int j = 0; j < n; ++j) hpat_.ptr[j + 1] += hpat_.ptr[j];

  for (auto& r : roots_)
    for (auto& e : r.elements) {
      if (!e.nonlinear) continue;
      const int nv = static_cast<int>(e.vars.size());
      e.pair_slot.assign(static_cast<size_t>(nv) * nv, -1);
      for (int a = 0; a < nv; ++a)
        for (int b = 0; b < nv; ++b)
          if (e.vars[a] >= e.vars[b])
            e.pair_slot[static_cast<size_t>(a) * nv + b] =
                slot.at(static_cast<long long>(e.vars[a]) * n + e.vars[b]);
    }
}

EvalWorkspace Model::make_workspace() const {
  EvalWorkspace ws;
  const size_t nn = static_cast<size_t>(p_.graph.num_nodes());
  ws.val.assign(nn, 0.0);
  ws.dot.assign(nn, 0.0);
  ws.bar.assign(nn, 0.0);
  ws.dbar.assign(nn, 0.0);
  ws.acc.assign(static_cast<size_t>(p_.n), 0.0);
  size_t max_nv = 0;
  for (const auto& r : roots_)
    for (const auto& e : r.elements) max_nv = std::max(max_nv, e.vars.size());
  ws.hloc.assign(max_nv, 0.0);
  return ws;
}

void Model::eval_tape(const std::vector<int>& tape, const dvec& t,
                      EvalWorkspace& ws) const {
  for (const int id : tape) {
    const ExprNode& nd = p_.graph.node(id);
    const int* ch = p_.graph.children(id);
    double v = 0.0;
    switch (nd.kind) {
      case ExprKind::Constant: v = nd.aux; break;
      case ExprKind::Variable: v = t[nd.var]; break;
      case ExprKind::Sum:
        for (int k = 0; k < nd.n_children; ++k) v += ws.val[ch[k]];
        break;
      case ExprKind::Product: v = ws.val[ch[0]] * ws.val[ch[1]]; break;
      case ExprKind::Power: v = std::pow(ws.val[ch[0]], nd.aux); break;
      case ExprKind::Neg: v = -ws.val[ch[0]]; break;
      case ExprKind::Inv: v = 1.0 / ws.val[ch[0]]; break;
      case ExprKind::Sin: v = std::sin(ws.val[ch[0]]); break;
      case ExprKind::Cos: v = std::cos(ws.val[ch[0]]); break;
      case ExprKind::Exp: v = std::exp(ws.val[ch[0]]); break;
      case ExprKind::Log: v = std::log(ws.val[ch[0]]); break;
      case ExprKind::Sqrt: v = std::sqrt(ws.val[ch[0]]); break;
    }
    ws.val[id] = v;
  }
}

// First-order adjoint sweep; ws.bar must hold the seed at the root and zero
// elsewhere on the tape. Variable adjoints accumulate into ws.acc.
void Model::reverse_tape(const Root& r, EvalWorkspace& ws) const {
  for (auto it = r.tape.rbegin(); it != r.tape.rend(); ++it) {
    const int id = *it;
    const double b = ws.bar[id];
    const ExprNode& nd = p_.graph.node(id);
    if (nd.kind == ExprKind::Variable) {
      ws.acc[nd.var] += b;
      continue;
    }
    if (b == 0.0 || nd.kind == ExprKind::Constant) continue;
    const int* ch = p_.graph.children(id);
    switch (nd.kind) {
      case ExprKind::Sum:
        for (int k = 0; k < nd.n_children; ++k) ws.bar[ch[k]] += b;
        break;
      case ExprKind::Product:
        ws.bar[ch[0]] += ws.val[ch[1]] * b;
        ws.bar[ch[1]] += ws.val[ch[0]] * b;
        break;
      case ExprKind::Power:
        ws.bar[ch[0]] += nd.aux * std::pow(ws.val[ch[0]], nd.aux - 1.0) * b;
        break;
      case ExprKind::Neg: ws.bar[ch[0]] -= b; break;
      case ExprKind::Inv:
        ws.bar[ch[0]] -= ws.val[id] * ws.val[id] * b;
        break;
      case ExprKind::Sin: ws.bar[ch[0]] += std::cos(ws.val[ch[0]]) * b; break;
      case ExprKind::Cos: ws.bar[ch[0]] -= std::sin(ws.val[ch[0]]) * b; break;
      case ExprKind::Exp: ws.bar[ch[0]] += ws.val[id] * b; break;
      case ExprKind::Log: ws.bar[ch[0]] += b / ws.val[ch[0]]; break;
      case ExprKind::Sqrt: ws.bar[ch[0]] += b / (2.0 * ws.val[id]); break;
      default: break;
    }
  }
}

double Model::eval_objective(const dvec& t, EvalWorkspace& ws) const {
  eval_tape(roots_[0].tape, t, ws);
  return ws.val[roots_[0].node];
}

void Model::eval_constraints(const dvec& t, EvalWorkspace& ws, dvec& c) const {
  c.resize(num_cons());
  for (int i = 0; i < num_cons(); ++i) {
    eval_tape(roots_[1 + i].tape, t, ws);
    c[i] = ws.val[roots_[1 + i].node];
  }
}

void Model::eval_gradient(const dvec& t, EvalWorkspace& ws, dvec& g) const {
  const Root& r = roots_[0];
  eval_tape(r.tape, t, ws);
  for (const int id : r.tape) ws.bar[id] = 0.0;
  for (const int v : r.vars) ws.acc[v] = 0.0;
  ws.bar[r.node] = 1.0;
  reverse_tape(r, ws);
  g = dvec::Zero(p_.n);
  for (const int v : r.vars) g[v] = ws.acc[v];
}

void Model::eval_jacobian(const dvec& t, EvalWorkspace& ws,
                          std::vector<double>& jval) const {
  jval.assign(jpat_.nnz(), 0.0);
  for (int i = 0; i < num_cons(); ++i) {
    const Root& r = roots_[1 + i];
    eval_tape(r.tape, t, ws);
    for (const int id : r.tape) ws.bar[id] = 0.0;
    for (const int v : r.vars) ws.acc[v] = 0.0;
    ws.bar[r.node] = 1.0;
    reverse_tape(r, ws);
    for (int p = jpat_.ptr[i]; p < jpat_.ptr[i + 1]; ++p)
      jval[p] = ws.acc[jpat_.idx[p]];
  }
}

// One forward-over-reverse pass per local variable of the element; each pass
// yields one row of the element Hessian which is scattered into the lower
// triangle slots precomputed at build time.
void Model::element_hessian(const Element& e, double weight, const dvec& t,
                            EvalWorkspace& ws,
                            std::vector<double>& hval) const {
  (void)t;
  const int nv = static_cast<int>(e.vars.size());
  for (int a = 0; a < nv; ++a) {
    const int seed = e.vars[a];
    for (const int id : e.tape) {
      const ExprNode& nd = p_.graph.node(id);
      const int* ch = p_.graph.children(id);
      double dv = 0.0;
      switch (nd.kind) {
        case ExprKind::Constant: break;
        case ExprKind::Variable: dv = (nd.var == seed) ? 1.0 : 0.0; break;
        case ExprKind::Sum:
          for (int k = 0; k < nd.n_children; ++k) dv += ws.dot[ch[k]];
          break;
        case ExprKind::Product:
          dv = ws.dot[ch[0]] * ws.val[ch[1]] + ws.val[ch[0]] * ws.dot[ch[1]];
          break;
        case ExprKind::Power:
          dv = nd.aux * std::pow(ws.val[ch[0]], nd.aux - 1.0) * ws.dot[ch[0]];
          break;
        case ExprKind::Neg: dv = -ws.dot[ch[0]]; break;
        case ExprKind::Inv:
          dv = -ws.val[id] * ws.val[id] * ws.dot[ch[0]];
          break;
        case ExprKind::Sin: dv = std::cos(ws.val[ch[0]]) * ws.dot[ch[0]]; break;
        case ExprKind::Cos: dv = -std::sin(ws.val[ch[0]]) * ws.dot[ch[0]]; break;
        case ExprKind::Exp: dv = ws.val[id] * ws.dot[ch[0]]; break;
        case ExprKind::Log: dv = ws.dot[ch[0]] / ws.val[ch[0]]; break;
        case ExprKind::Sqrt: dv = ws.dot[ch[0]] / (2.0 * ws.val[id]); break;
      }
      ws.dot[id] = dv;
    }
    for (const int id : e.tape) {
      ws.bar[id] = 0.0;
      ws.dbar[id] = 0.0;
    }
    for (int b = 0; b < nv; ++b) ws.hloc[b] = 0.0;
    ws.bar[e.tape.back()] = 1.0;
    for (auto it = e.tape.rbegin(); it != e.tape.rend(); ++it) {
      const int id = *it;
      const double b = ws.bar[id], db = ws.dbar[id];
      const ExprNode& nd = p_.graph.node(id);
      if (nd.kind == ExprKind::Variable) {
        const int lv = static_cast<int>(
            std::lower_bound(e.vars.begin(), e.vars.end(), nd.var) -
            e.vars.begin());
        ws.hloc[lv] += db;
        continue;
      }
      if ((b == 0.0 && db == 0.0) || nd.kind == ExprKind::Constant) continue;
      const int* ch = p_.graph.children(id);
      switch (nd.kind) {
        case ExprKind::Sum:
          for (int k = 0; k < nd.n_children; ++k) {
            ws.bar[ch[k]] += b;
            ws.dbar[ch[k]] += db;
          }
          break;
        case ExprKind::Product: {
          ws.bar[ch[0]] += ws.val[ch[1]] * b;
          ws.dbar[ch[0]] += ws.val[ch[1]] * db + ws.dot[ch[1]] * b;
          ws.bar[ch[1]] += ws.val[ch[0]] * b;
          ws.dbar[ch[1]] += ws.val[ch[0]] * db + ws.dot[ch[0]] * b;
          break;
        }
        case ExprKind::Power: {
          const double av = ws.val[ch[0]];
          const double fa = nd.aux * std::pow(av, nd.aux - 1.0);
          const double faa = nd.aux * (nd.aux - 1.0) * std::pow(av, nd.aux - 2.0);
          ws.bar[ch[0]] += fa * b;
          ws.dbar[ch[0]] += fa * db + faa * ws.dot[ch[0]] * b;
          break;
        }
        case ExprKind::Neg:
          ws.bar[ch[0]] -= b;
          ws.dbar[ch[0]] -= db;
          break;
        case ExprKind::Inv: {
          const double v = ws.val[id];
          const double fa = -v * v, faa = 2.0 * v * v * v;
          ws.bar[ch[0]] += fa * b;
          ws.dbar[ch[0]] += fa * db + faa * ws.dot[ch[0]] * b;
          break;
        }
        case ExprKind::Sin: {
          const double av = ws.val[ch[0]];
          const double fa = std::cos(av), faa = -ws.val[id];
          ws.bar[ch[0]] += fa * b;
          ws.dbar[ch[0]] += fa * db + faa * ws.dot[ch[0]] * b;
          break;
        }
        case ExprKind::Cos: {
          const double av = ws.val[ch[0]];
          const double fa = -std::sin(av), faa = -ws.val[id];
          ws.bar[ch[0]] += fa * b;
          ws.dbar[ch[0]] += fa * db + faa * ws.dot[ch[0]] * b;
          break;
        }
        case ExprKind::Exp: {
          const double v = ws.val[id];
          ws.bar[ch[0]] += v * b;
          ws.dbar[ch[0]] += v * db + v * ws.dot[ch[0]] * b;
          break;
        }
        case ExprKind::Log: {
          const double av = ws.val[ch[0]];
          const double fa = 1.0 / av, faa = -1.0 / (av * av);
          ws.bar[ch[0]] += fa * b;
          ws.dbar[ch[0]] += fa * db + faa * ws.dot[ch[0]] * b;
          break;
        }
        case ExprKind::Sqrt: {
          const double v = ws.val[id];
          const double fa = 1.0 / (2.0 * v), faa = -1.0 / (4.0 * v * v * v);
          ws.bar[ch[0]] += fa * b;
          ws.dbar[ch[0]] += fa * db + faa * ws.dot[ch[0]] * b;
          break;
        }
        default: break;
      }
    }
    for (int b = 0; b < nv; ++b) {
      const int s = e.pair_slot[static_cast<size_t>(a) * nv + b];
      if (s >= 0) hval[s] += weight * ws.hloc[b];
    }
  }
}

void Model::eval_lag_hessian(const dvec& t, double obj_scale, const dvec& y,
                             EvalWorkspace& ws,
                             std::vector<double>& hval) const {
  hval.assign(hpat_.nnz(), 0.0);
  if (obj_scale != 0.0) {
    for (const auto& e : roots_[0].elements) {
      if (!e.nonlinear) continue;
      eval_tape(e.tape, t, ws);
      element_hessian(e, obj_scale, t, ws, hval);
    }
  }
  for (int i = 0; i < num_cons(); ++i) {
    if (y[i] == 0.0) continue;
    for (const auto& e : roots_[1 + i].elements) {
      if (!e.nonlinear) continue;
      eval_tape(e.tape, t, ws);
      element_hessian(e, -y[i], t, ws, hval);
    }
  }
}

NlpForm to_nlp_form(const Model& mdl) {
  NlpForm f;
  f.nt = mdl.num_vars();
  f.ns = mdl.num_ineq();
  f.n = f.nt + f.ns;
  f.m_eq = mdl.num_eq();
  f.m_ineq = mdl.num_ineq();
  f.m = f.m_eq + f.m_ineq;
  f.lb.resize(f.n);
  f.ub.resize(f.n);
  f.lb.head(f.nt) = mdl.problem().lb;
  f.ub.head(f.nt) = mdl.problem().ub;
  for (int j = 0; j < f.ns; ++j) {
    f.lb[f.nt + j] = mdl.problem().ineq[j].lower;
    f.ub[f.nt + j] = mdl.problem().ineq[j].upper;
  }
  return f;
}

}  // namespace ncl
