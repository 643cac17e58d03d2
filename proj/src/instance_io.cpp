#include <ncl/instance_io.hpp>

#include <cmath>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <vector>

namespace ncl {

namespace {

[[noreturn]] void fail(int line, const std::string& msg) {
  throw std::runtime_error("line " + std::to_string(line) + ": " + msg);
}

double parse_num(const std::string& tok, int line, const std::string& what) {
  if (tok == "inf" || tok == "+inf") return kInf;
  if (tok == "-inf") return -kInf;
  try {
    size_t pos = 0;
    const double v = std::stod(tok, &pos);
    if (pos == tok.size()) return v;
  } catch (const std::exception&) {
  }
  fail(line, what + ": bad number '" + tok + "'");
}

struct ExprParser {
  const std::vector<std::string>& toks;
  size_t pos;
  int line;
  ExprGraph& graph;
  const std::map<std::string, int>& var_node;

  const std::string& next(const char* what) {
    if (pos >= toks.size()) fail(line, std::string(what) + ": expression ends early");
    return toks[pos++];
  }

  int parse() {
    const std::string& t = next("expr");
    if (t == "add") {
      const int a = parse();
      return graph.sum({a, parse()});
    }
    if (t == "sub") {
      const int a = parse();
      return graph.sum({a, graph.neg(parse())});
    }
    if (t == "mul") {
      const int a = parse();
      return graph.product(a, parse());
    }
    if (t == "div") {
      const int a = parse();
      return graph.product(a, graph.inv(parse()));
    }
    if (t == "pow") {
      const int a = parse();
      return graph.power(a, parse_num(next("pow"), line, "pow exponent"));
    }
    if (t == "neg") return graph.neg(parse());
    if (t == "inv") return graph.inv(parse());
    if (t == "sin") return graph.sin_(parse());
    if (t == "cos") return graph.cos_(parse());
    if (t == "exp") return graph.exp_(parse());
    if (t == "log") return graph.log_(parse());
    if (t == "sqrt") return graph.sqrt_(parse());
    if (auto it = var_node.find(t); it != var_node.end()) return it->second;
    if (!t.empty() && (std::isdigit(static_cast<unsigned char>(t[0])) ||
                       t[0] == '-' || t[0] == '+' || t[0] == '.'))
      return graph.constant(parse_num(t, line, "expr"));
    fail(line, "expr: unknown token '" + t + "'");
  }
};

double default_start(double lo, double hi) {
  const bool lf = std::isfinite(lo), uf = std::isfinite(hi);
  if (lf && uf) return 0.5 * (lo + hi);
  if (lf) return lo + 1.0;
  if (uf) return hi - 1.0;
  return 0.0;
}

std::string num_str(double v) {
  if (v == kInf) return "inf";
  if (v == -kInf) return "-inf";
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

void emit_expr(const ExprGraph& g, int id, const NcoProblem& p,
               std::ostream& os);

void emit_sum(const ExprGraph& g, const int* ch, int count,
              const NcoProblem& p, std::ostream& os) {
  if (count == 1) {
    emit_expr(g, ch[0], p, os);
    return;
  }
  os << "add ";
  emit_expr(g, ch[0], p, os);
  os << ' ';
  emit_sum(g, ch + 1, count - 1, p, os);
}

void emit_expr(const ExprGraph& g, int id, const NcoProblem& p,
               std::ostream& os) {
  const ExprNode& n = g.node(id);
  const int* ch = g.children(id);
  switch (n.kind) {
    case ExprKind::Constant: os << num_str(n.aux); return;
    case ExprKind::Variable:
      if (!p.var_names.empty())
        os << p.var_names[n.var];
      else
        os << 'x' << n.var;
      return;
    case ExprKind::Sum:
      if (n.n_children == 0) {
        os << '0';
        return;
      }
      emit_sum(g, ch, n.n_children, p, os);
      return;
    case ExprKind::Product:
      os << "mul ";
      emit_expr(g, ch[0], p, os);
      os << ' ';
      emit_expr(g, ch[1], p, os);
      return;
    case ExprKind::Power:
      os << "pow ";
      emit_expr(g, ch[0], p, os);
      os << ' ' << num_str(n.aux);
      return;
    case ExprKind::Neg: os << "neg "; break;
    case ExprKind::Inv: os << "inv "; break;
    case ExprKind::Sin: os << "sin "; break;
    case ExprKind::Cos: os << "cos "; break;
    case ExprKind::Exp: os << "exp "; break;
    case ExprKind::Log: os << "log "; break;
    case ExprKind::Sqrt: os << "sqrt "; break;
  }
  emit_expr(g, ch[0], p, os);
}

}  // namespace

NcoProblem parse_instance_text(const std::string& text,
                               const std::string& fallback_name) {
  NcoProblem p;
  p.name = fallback_name;
  std::map<std::string, int> var_idx, var_node;
  std::vector<double> lb, ub, start;
  std::vector<char> has_start;
  bool any_start = false, have_obj = false;

  std::istringstream in(text);
  std::string raw;
  int line = 0;
  while (std::getline(in, raw)) {
    ++line;
    if (const size_t h = raw.find('#'); h != std::string::npos)
      raw.erase(h);
    std::istringstream ls(raw);
    std::vector<std::string> toks;
    for (std::string t; ls >> t;) toks.push_back(t);
    if (toks.empty()) continue;
    const std::string& d = toks[0];

    if (d == "name") {
      if (toks.size() != 2) fail(line, "name: expected one identifier");
      p.name = toks[1];
    } else if (d == "var") {
      if (toks.size() != 4 && toks.size() != 5)
        fail(line, "var: expected <name> <lower> <upper> [<start>]");
      if (var_idx.count(toks[1]))
        fail(line, "var: duplicate name '" + toks[1] + "'");
      const double lo = parse_num(toks[2], line, "var lower");
      const double hi = parse_num(toks[3], line, "var upper");
      if (!(lo <= hi)) fail(line, "var: lower bound above upper bound");
      const int idx = static_cast<int>(lb.size());
      var_idx[toks[1]] = idx;
      var_node[toks[1]] = p.graph.variable(idx);
      p.var_names.push_back(toks[1]);
      lb.push_back(lo);
      ub.push_back(hi);
      if (toks.size() == 5) {
        start.push_back(parse_num(toks[4], line, "var start"));
        has_start.push_back(1);
        any_start = true;
      } else {
        start.push_back(0.0);
        has_start.push_back(0);
      }
    } else if (d == "objective" || d == "eq" || d == "range") {
      size_t first = 1;
      double rhs = 0.0, lo = 0.0, hi = 0.0;
      if (d == "eq") {
        if (toks.size() < 3) fail(line, "eq: expected <rhs> <expr>");
        rhs = parse_num(toks[1], line, "eq rhs");
        first = 2;
      } else if (d == "range") {
        if (toks.size() < 4) fail(line, "range: expected <lo> <hi> <expr>");
        lo = parse_num(toks[1], line, "range lower");
        hi = parse_num(toks[2], line, "range upper");
        if (!(lo <= hi)) fail(line, "range: lower bound above upper bound");
        first = 3;
      } else if (toks.size() < 2) {
        fail(line, "objective: expected <expr>");
      }
      ExprParser ep{toks, first, line, p.graph, var_node};
      int id = ep.parse();
      if (ep.pos != toks.size()) {
        fail(line, d + ": trailing token '" + toks[ep.pos] + "'");
      }
      if (d == "objective") {
        if (have_obj) fail(line, "objective: already defined");
        p.objective = id;
        have_obj = true;
      } else if (d == "eq") {
        if (rhs != 0.0)
          id = p.graph.sum({id, p.graph.constant(-rhs)});
        p.eq.push_back(id);
      } else {
        p.ineq.push_back({id, lo, hi});
      }
    } else {
      fail(line, "unknown directive '" + d + "'");
    }
  }

  if (!have_obj) throw std::runtime_error("missing objective directive");
  p.n = static_cast<int>(lb.size());
  p.lb = Eigen::Map<dvec>(lb.data(), p.n);
  p.ub = Eigen::Map<dvec>(ub.data(), p.n);
  if (any_start) {
    p.start.resize(p.n);
    for (int i = 0; i < p.n; ++i)
      p.start[i] = has_start[i] ? start[i] : default_start(lb[i], ub[i]);
  }
  return p;
}

NcoProblem load_instance_file(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("cannot open instance file: " + path);
  std::ostringstream buf;
  buf << f.rdbuf();
  std::string base = path;
  if (const size_t s = base.find_last_of("/\\"); s != std::string::npos)
    base.erase(0, s + 1);
  if (const size_t dot = base.rfind('.'); dot != std::string::npos)
    base.erase(dot);
  return parse_instance_text(buf.str(), base);
}

std::string format_instance(const NcoProblem& p) {
  std::ostringstream os;
  os << "name " << p.name << '\n';
  const bool starts = p.start.size() == p.n;
  for (int i = 0; i < p.n; ++i) {
    os << "var ";
    if (!p.var_names.empty())
      os << p.var_names[i];
    else
      os << 'x' << i;
    os << ' ' << num_str(p.lb.size() ? p.lb[i] : -kInf) << ' '
       << num_str(p.ub.size() ? p.ub[i] : kInf);
    if (starts) os << ' ' << num_str(p.start[i]);
    os << '\n';
  }
  os << "objective ";
  emit_expr(p.graph, p.objective, p, os);
  os << '\n';
  for (const int e : p.eq) {
    os << "eq 0 ";
    emit_expr(p.graph, e, p, os);
    os << '\n';
  }
  for (const auto& r : p.ineq) {
    os << "range " << num_str(r.lower) << ' ' << num_str(r.upper) << ' ';
    emit_expr(p.graph, r.expr, p, os);
    os << '\n';
  }
  return os.str();
}

void write_instance_file(const NcoProblem& p, const std::string& path) {
  std::ofstream f(path);
  if (!f) throw std::runtime_error("cannot open for writing: " + path);
  f << format_instance(p);
}

}  // namespace ncl
