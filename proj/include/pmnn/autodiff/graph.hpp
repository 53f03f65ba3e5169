#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cstdint>
#include <initializer_list>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "pmnn/error.hpp"

namespace pmnn::ad {

/// Every node value is a 2-D array. Rows index features (hidden units),
/// columns index collocation points. Parameters and reductions carry a
/// single column and broadcast against batched operands.
using Array = Eigen::ArrayXXd;
using NodeId = std::int32_t;

/// Marks a structurally zero operand (used by Stack and by jets).
inline constexpr NodeId kZero = -1;

enum class Op : std::uint8_t {
  Coordinate,  // row `index` of the coordinate feed
  Data,        // data feed slot `index` (externally supplied per evaluation)
  Parameter,   // row-major block [index, index + rows*cols) of the parameter vector
  Constant,
  Add,
  Sub,
  Mul,
  Div,
  Neg,
  Scale,   // scalar * arg
  Offset,  // arg + scalar
  Square,
  Sqrt,
  Tanh,
  Sin,
  Cos,
  MatMul,  // args[0] (spatially constant matrix) times args[1]
  Stack,   // vertical concatenation; kZero args contribute stack_rows[i] zero rows
  Mean,    // mean over all entries, 1x1
  Sum,     // sum over all entries, 1x1
  Detach,  // identity value, blocks parameter gradients
};

inline const char* op_name(Op op) {
  switch (op) {
    case Op::Coordinate: return "coordinate";
    case Op::Data: return "data";
    case Op::Parameter: return "parameter";
    case Op::Constant: return "constant";
    case Op::Add: return "add";
    case Op::Sub: return "sub";
    case Op::Mul: return "mul";
    case Op::Div: return "div";
    case Op::Neg: return "neg";
    case Op::Scale: return "scale";
    case Op::Offset: return "offset";
    case Op::Square: return "square";
    case Op::Sqrt: return "sqrt";
    case Op::Tanh: return "tanh";
    case Op::Sin: return "sin";
    case Op::Cos: return "cos";
    case Op::MatMul: return "matmul";
    case Op::Stack: return "stack";
    case Op::Mean: return "mean";
    case Op::Sum: return "sum";
    case Op::Detach: return "detach";
  }
  return "?";
}

struct Node {
  Op op = Op::Constant;
  std::vector<NodeId> args;
  double scalar = 0.0;
  int index = 0;
  int rows = 0;
  int cols = 0;
  std::vector<int> stack_rows;
  Array constant;
  bool on_params = false;  // reachable from a parameter through non-detached edges
  bool on_coords = false;  // varies with the coordinates
  bool dynamic = false;    // value depends on parameters or data feeds (detached or not)
};

class Graph;

/// Lightweight handle to a node of a Graph. The graph must outlive it.
class Var {
 public:
  Var() = default;
  Var(Graph* g, NodeId id) : graph_(g), id_(id) {}

  Graph* graph() const { return graph_; }
  NodeId id() const { return id_; }
  bool valid() const { return graph_ != nullptr && id_ >= 0; }

 private:
  Graph* graph_ = nullptr;
  NodeId id_ = kZero;
};

/// Append-only expression graph. Children always precede their parents, so
/// node ids are a topological order. Not copyable: Vars point into it.
class Graph {
 public:
  explicit Graph(int arity = 0) : arity_(arity) {}
  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;

  int arity() const { return arity_; }
  std::size_t size() const { return nodes_.size(); }
  const Node& node(NodeId id) const { return nodes_.at(static_cast<std::size_t>(id)); }

  /// Number of parameter entries the graph reads (max extent over Parameter nodes).
  int parameter_extent() const { return param_extent_; }
  int data_slots() const { return data_slots_; }

  Var coordinate(int i) {
    if (i < 0 || i >= arity_)
      throw DimensionError("coordinate " + std::to_string(i) + " outside declared arity " +
                           std::to_string(arity_));
    Node n;
    n.op = Op::Coordinate;
    n.index = i;
    n.on_coords = true;
    return push(std::move(n));
  }

  std::vector<Var> coordinates() {
    std::vector<Var> out;
    for (int i = 0; i < arity_; ++i) out.push_back(coordinate(i));
    return out;
  }

  Var data(int slot) {
    Node n;
    n.op = Op::Data;
    n.index = slot;
    n.dynamic = true;
    data_slots_ = std::max(data_slots_, slot + 1);
    return push(std::move(n));
  }

  Var parameter(int offset, int rows, int cols) {
    if (offset < 0 || rows < 1 || cols < 1) throw InvalidArgument("bad parameter block");
    Node n;
    n.op = Op::Parameter;
    n.index = offset;
    n.rows = rows;
    n.cols = cols;
    n.on_params = true;
    n.dynamic = true;
    param_extent_ = std::max(param_extent_, offset + rows * cols);
    return push(std::move(n));
  }

  Var constant(double c) { return constant(Array::Constant(1, 1, c)); }

  Var constant(Array value) {
    Node n;
    n.op = Op::Constant;
    n.constant = std::move(value);
    return push(std::move(n));
  }

  Var unary(Op op, Var a, double scalar = 0.0) {
    Node n;
    n.op = op;
    n.args = {own(a)};
    n.scalar = scalar;
    return push(std::move(n));
  }

  Var binary(Op op, Var a, Var b) {
    Node n;
    n.op = op;
    n.args = {own(a), own(b)};
    return push(std::move(n));
  }

  /// Rows of `parts` stacked top to bottom. An invalid Var stands for a
  /// block of `zero_rows[i]` zero rows.
  Var stack(std::span<const Var> parts, std::span<const int> rows) {
    if (parts.empty() || parts.size() != rows.size())
      throw InvalidArgument("stack needs one row count per part");
    Node n;
    n.op = Op::Stack;
    for (std::size_t i = 0; i < parts.size(); ++i) {
      n.args.push_back(parts[i].valid() ? own(parts[i]) : kZero);
      n.stack_rows.push_back(rows[i]);
    }
    return push(std::move(n));
  }

 private:
  NodeId own(Var v) const {
    if (v.graph() != this || !v.valid()) throw InvalidArgument("operand belongs to another graph");
    return v.id();
  }

  Var push(Node n) {
    for (NodeId a : n.args)
      if (a != kZero) n.dynamic = n.dynamic || nodes_[a].dynamic;
    if (n.op != Op::Detach) {
      for (NodeId a : n.args) {
        if (a == kZero) continue;
        n.on_params = n.on_params || nodes_[a].on_params;
        n.on_coords = n.on_coords || nodes_[a].on_coords;
      }
    } else {
      n.on_coords = nodes_[n.args[0]].on_coords;
    }
    if (n.op == Op::Mean || n.op == Op::Sum) n.on_coords = false;
    if (n.op == Op::MatMul && nodes_[n.args[0]].on_coords)
      throw InvalidArgument("matmul requires a coordinate-independent left operand");
    nodes_.push_back(std::move(n));
    return Var(this, static_cast<NodeId>(nodes_.size() - 1));
  }

  int arity_;
  int param_extent_ = 0;
  int data_slots_ = 0;
  std::vector<Node> nodes_;
};

// Arithmetic on handles. Operands must share a graph.

inline Graph& graph_of(Var a) {
  if (!a.valid()) throw InvalidArgument("operation on an empty Var");
  return *a.graph();
}

inline Var operator+(Var a, Var b) { return graph_of(a).binary(Op::Add, a, b); }
inline Var operator-(Var a, Var b) { return graph_of(a).binary(Op::Sub, a, b); }
inline Var operator*(Var a, Var b) { return graph_of(a).binary(Op::Mul, a, b); }
inline Var operator/(Var a, Var b) { return graph_of(a).binary(Op::Div, a, b); }
inline Var operator-(Var a) { return graph_of(a).unary(Op::Neg, a); }
inline Var operator*(double s, Var a) { return graph_of(a).unary(Op::Scale, a, s); }
inline Var operator*(Var a, double s) { return s * a; }
inline Var operator/(Var a, double s) { return (1.0 / s) * a; }
inline Var operator+(Var a, double s) { return graph_of(a).unary(Op::Offset, a, s); }
inline Var operator+(double s, Var a) { return a + s; }
inline Var operator-(Var a, double s) { return a + (-s); }
inline Var operator-(double s, Var a) { return graph_of(a).unary(Op::Offset, -a, s); }

inline Var square(Var a) { return graph_of(a).unary(Op::Square, a); }
inline Var sqrt(Var a) { return graph_of(a).unary(Op::Sqrt, a); }
inline Var tanh(Var a) { return graph_of(a).unary(Op::Tanh, a); }
inline Var sin(Var a) { return graph_of(a).unary(Op::Sin, a); }
inline Var cos(Var a) { return graph_of(a).unary(Op::Cos, a); }
inline Var mean(Var a) { return graph_of(a).unary(Op::Mean, a); }
inline Var sum(Var a) { return graph_of(a).unary(Op::Sum, a); }
inline Var detach(Var a) { return graph_of(a).unary(Op::Detach, a); }
inline Var matmul(Var w, Var x) { return graph_of(w).binary(Op::MatMul, w, x); }

/// Root-mean-square over all entries: sqrt(mean(a^2)).
inline Var rms(Var a) { return sqrt(mean(square(a))); }

/// Stacks 1-row expressions into a column of features.
inline Var stack_rows(std::span<const Var> parts) {
  if (parts.empty()) throw InvalidArgument("stack of nothing");
  std::vector<int> rows(parts.size(), 1);
  return graph_of(parts.front()).stack(parts, rows);
}

}  // namespace pmnn::ad
