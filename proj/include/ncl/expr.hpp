#pragma once
// Expression graph for objectives and constraints. Nodes live in an arena
// owned by ExprGraph; children always have smaller ids than their parents,
// so ascending id order is a valid evaluation order. The graph is immutable
// once handed to a Model.

#include <cstdint>
#include <vector>

namespace ncl {

enum class ExprKind : std::uint8_t {
  Constant,
  Variable,
  Sum,      // n-ary
  Product,  // binary
  Power,    // base ^ constant real exponent
  Neg,
  Inv,
  Sin,
  Cos,
  Exp,
  Log,
  Sqrt,
};

struct ExprNode {
  ExprKind kind;
  double aux = 0.0;     // Constant: value; Power: exponent; Variable: unused
  int var = -1;         // Variable: index into the decision vector
  int child_begin = 0;  // span into ExprGraph children pool
  int n_children = 0;
};

class ExprGraph {
 public:
  int constant(double v);
  int variable(int index);
  int sum(const std::vector<int>& terms);  // empty -> constant 0
  int product(int a, int b);
  int power(int base, double exponent);
  int neg(int a);
  int inv(int a);
  int sin_(int a);
  int cos_(int a);
  int exp_(int a);
  int log_(int a);
  int sqrt_(int a);

  int num_nodes() const { return static_cast<int>(nodes_.size()); }
  const ExprNode& node(int id) const { return nodes_[id]; }
  const int* children(int id) const {
    return children_.data() + nodes_[id].child_begin;
  }
  // 1 + largest variable index referenced so far
  int num_variables() const { return n_vars_; }

 private:
  int push(ExprKind kind, double aux, const int* ch, int n_ch, int var = -1);
  std::vector<ExprNode> nodes_;
  std::vector<int> children_;
  int n_vars_ = 0;
};

// Thin value wrapper so builders read like the algebra they encode.
struct Ex {
  ExprGraph* g = nullptr;
  int id = -1;
};

inline Ex wrap(ExprGraph& g, int id) { return Ex{&g, id}; }
inline Ex lit(ExprGraph& g, double v) { return Ex{&g, g.constant(v)}; }

inline Ex operator+(Ex a, Ex b) { return {a.g, a.g->sum({a.id, b.id})}; }
inline Ex operator+(Ex a, double c) { return a + lit(*a.g, c); }
inline Ex operator+(double c, Ex a) { return lit(*a.g, c) + a; }
inline Ex operator-(Ex a) { return {a.g, a.g->neg(a.id)}; }
inline Ex operator-(Ex a, Ex b) { return a + (-b); }
inline Ex operator-(Ex a, double c) { return a + (-c); }
inline Ex operator-(double c, Ex a) { return lit(*a.g, c) + (-a); }
inline Ex operator*(Ex a, Ex b) { return {a.g, a.g->product(a.id, b.id)}; }
inline Ex operator*(double c, Ex a) { return lit(*a.g, c) * a; }
inline Ex operator*(Ex a, double c) { return c * a; }
inline Ex operator/(Ex a, Ex b) { return {a.g, a.g->product(a.id, a.g->inv(b.id))}; }
inline Ex operator/(Ex a, double c) { return a * (1.0 / c); }
inline Ex operator/(double c, Ex a) { return lit(*a.g, c) / a; }
inline Ex pow(Ex a, double p) { return {a.g, a.g->power(a.id, p)}; }
inline Ex sq(Ex a) { return pow(a, 2.0); }
inline Ex sin(Ex a) { return {a.g, a.g->sin_(a.id)}; }
inline Ex cos(Ex a) { return {a.g, a.g->cos_(a.id)}; }
inline Ex exp(Ex a) { return {a.g, a.g->exp_(a.id)}; }
inline Ex log(Ex a) { return {a.g, a.g->log_(a.id)}; }
inline Ex sqrt(Ex a) { return {a.g, a.g->sqrt_(a.id)}; }

}  // namespace ncl
