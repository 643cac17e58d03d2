#include <ncl/expr.hpp>

#include <stdexcept>

namespace ncl {

int ExprGraph::push(ExprKind kind, double aux, const int* ch, int n_ch,
                    int var) {
  const int id = static_cast<int>(nodes_.size());
  ExprNode n;
  n.kind = kind;
  n.aux = aux;
  n.var = var;
  n.child_begin = static_cast<int>(children_.size());
  n.n_children = n_ch;
  for (int k = 0; k < n_ch; ++k) {
    if (ch[k] < 0 || ch[k] >= id)
      throw std::invalid_argument("expr: child id out of range");
    children_.push_back(ch[k]);
  }
  nodes_.push_back(n);
  return id;
}

int ExprGraph::constant(double v) { return push(ExprKind::Constant, v, nullptr, 0); }

int ExprGraph::variable(int index) {
  if (index < 0) throw std::invalid_argument("expr: negative variable index");
  if (index + 1 > n_vars_) n_vars_ = index + 1;
  return push(ExprKind::Variable, 0.0, nullptr, 0, index);
}

int ExprGraph::sum(const std::vector<int>& terms) {
  if (terms.empty()) return constant(0.0);
  if (terms.size() == 1) return terms[0];
  return push(ExprKind::Sum, 0.0, terms.data(), static_cast<int>(terms.size()));
}

int ExprGraph::product(int a, int b) {
  const int ch[2] = {a, b};
  return push(ExprKind::Product, 0.0, ch, 2);
}

int ExprGraph::power(int base, double exponent) {
  return push(ExprKind::Power, exponent, &base, 1);
}

int ExprGraph::neg(int a) { return push(ExprKind::Neg, 0.0, &a, 1); }
int ExprGraph::inv(int a) { return push(ExprKind::Inv, 0.0, &a, 1); }
int ExprGraph::sin_(int a) { return push(ExprKind::Sin, 0.0, &a, 1); }
int ExprGraph::cos_(int a) { return push(ExprKind::Cos, 0.0, &a, 1); }
int ExprGraph::exp_(int a) { return push(ExprKind::Exp, 0.0, &a, 1); }
int ExprGraph::log_(int a) { return push(ExprKind::Log, 0.0, &a, 1); }
int ExprGraph::sqrt_(int a) { return push(ExprKind::Sqrt, 0.0, &a, 1); }

}  // namespace ncl
