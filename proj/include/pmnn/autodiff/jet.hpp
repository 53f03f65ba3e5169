#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "pmnn/autodiff/graph.hpp"

namespace pmnn::ad {

/// Value, spatial gradient and Laplacian of an expression, as nodes of the
/// same graph. An invalid Var in `grad` or `lap` is a structural zero.
struct JetVars {
  Var value;
  std::vector<Var> grad;
  Var lap;
};

namespace detail {

inline Var zadd(Var a, Var b) {
  if (!a.valid()) return b;
  if (!b.valid()) return a;
  return a + b;
}

inline Var zsub(Var a, Var b) {
  if (!b.valid()) return a;
  if (!a.valid()) return -b;
  return a - b;
}

inline Var zmul(Var a, Var b) {
  if (!a.valid() || !b.valid()) return {};
  return a * b;
}

inline Var zscale(double s, Var a) { return a.valid() ? s * a : Var{}; }
inline Var zneg(Var a) { return a.valid() ? -a : Var{}; }
inline Var zdiv(Var a, Var b) { return a.valid() ? a / b : Var{}; }

/// sum_i a_i * b_i over gradient components.
inline Var zdot(const std::vector<Var>& a, const std::vector<Var>& b) {
  Var out;
  for (std::size_t i = 0; i < a.size(); ++i) out = zadd(out, zmul(a[i], b[i]));
  return out;
}

inline Var znorm2(const std::vector<Var>& a) {
  Var out;
  for (const Var& v : a) out = zadd(out, v.valid() ? square(v) : Var{});
  return out;
}

}  // namespace detail

/// Forward propagation of second-order spatial jets through a graph.
///
/// Each node is mapped once (memoized) to its JetVars by the chain rule. The
/// new nodes are ordinary graph nodes, so the evaluator can differentiate
/// them with respect to parameters. Only the diagonal of the Hessian is
/// carried; the Laplacian rule for products and compositions needs the
/// gradient only through sum_i (d_i u)(d_i v) terms.
class JetBuilder {
 public:
  explicit JetBuilder(Graph& g) : graph_(&g), dim_(g.arity()) {}

  int dimension() const { return dim_; }

  JetVars operator()(Var u) {
    if (u.graph() != graph_) throw InvalidArgument("jet of a foreign expression");
    return jet(u.id());
  }

 private:
  JetVars constant_jet(NodeId id) {
    JetVars j;
    j.value = Var(graph_, id);
    j.grad.assign(dim_, Var{});
    return j;
  }

  JetVars jet(NodeId id) {
    if (memo_.size() < graph_->size()) memo_.resize(graph_->size());
    if (memo_[id]) return *memo_[id];
    JetVars j = build(id);
    if (memo_.size() < graph_->size()) memo_.resize(graph_->size());
    memo_[id] = j;
    return j;
  }

  JetVars build(NodeId id) {
    using namespace detail;
    const Node n = graph_->node(id);  // copy: the node vector grows below
    if (!n.on_coords) return constant_jet(id);
    Var self(graph_, id);
    JetVars out;
    out.value = self;
    out.grad.assign(dim_, Var{});

    switch (n.op) {
      case Op::Coordinate:
        out.grad[n.index] = graph_->constant(1.0);
        return out;
      case Op::Data:
      case Op::Parameter:
      case Op::Constant:
      case Op::Mean:
      case Op::Sum:
        return constant_jet(id);
      case Op::Detach: {
        JetVars a = jet(n.args[0]);
        for (int i = 0; i < dim_; ++i) out.grad[i] = a.grad[i].valid() ? detach(a.grad[i]) : Var{};
        out.lap = a.lap.valid() ? detach(a.lap) : Var{};
        return out;
      }
      case Op::Add:
      case Op::Sub: {
        JetVars a = jet(n.args[0]);
        JetVars b = jet(n.args[1]);
        const bool add = n.op == Op::Add;
        for (int i = 0; i < dim_; ++i)
          out.grad[i] = add ? zadd(a.grad[i], b.grad[i]) : zsub(a.grad[i], b.grad[i]);
        out.lap = add ? zadd(a.lap, b.lap) : zsub(a.lap, b.lap);
        return out;
      }
      case Op::Neg:
      case Op::Scale: {
        JetVars a = jet(n.args[0]);
        const double s = n.op == Op::Neg ? -1.0 : n.scalar;
        for (int i = 0; i < dim_; ++i) out.grad[i] = zscale(s, a.grad[i]);
        out.lap = zscale(s, a.lap);
        return out;
      }
      case Op::Offset: {
        JetVars a = jet(n.args[0]);
        out.grad = a.grad;
        out.lap = a.lap;
        return out;
      }
      case Op::Mul: {
        JetVars a = jet(n.args[0]);
        JetVars b = jet(n.args[1]);
        for (int i = 0; i < dim_; ++i)
          out.grad[i] = zadd(zmul(a.grad[i], b.value), zmul(a.value, b.grad[i]));
        // lap(ab) = lap(a) b + 2 grad(a).grad(b) + a lap(b)
        out.lap = zadd(zadd(zmul(a.lap, b.value), zscale(2.0, zdot(a.grad, b.grad))),
                       zmul(a.value, b.lap));
        return out;
      }
      case Op::Div: {
        JetVars a = jet(n.args[0]);
        JetVars b = jet(n.args[1]);
        // grad q = (grad a - q grad b) / b
        for (int i = 0; i < dim_; ++i)
          out.grad[i] = zdiv(zsub(a.grad[i], zmul(self, b.grad[i])), b.value);
        // lap q = (lap a - 2 grad q . grad b - q lap b) / b
        out.lap = zdiv(zsub(zsub(a.lap, zscale(2.0, zdot(out.grad, b.grad))), zmul(self, b.lap)),
                       b.value);
        return out;
      }
      case Op::Square: {
        JetVars a = jet(n.args[0]);
        for (int i = 0; i < dim_; ++i) out.grad[i] = zscale(2.0, zmul(a.value, a.grad[i]));
        out.lap = zscale(2.0, zadd(znorm2(a.grad), zmul(a.value, a.lap)));
        return out;
      }
      case Op::Sqrt: {
        JetVars a = jet(n.args[0]);
        Var two_s = 2.0 * self;
        for (int i = 0; i < dim_; ++i) out.grad[i] = zdiv(a.grad[i], two_s);
        // lap s = (lap a - 2 |grad s|^2) / (2 s)
        out.lap = zdiv(zsub(a.lap, zscale(2.0, znorm2(out.grad))), two_s);
        return out;
      }
      case Op::Tanh:
      case Op::Sin:
      case Op::Cos: {
        JetVars a = jet(n.args[0]);
        Var d1, d2;  // f'(a), f''(a)
        if (n.op == Op::Tanh) {
          d1 = 1.0 - square(self);
          d2 = -2.0 * (self * d1);
        } else if (n.op == Op::Sin) {
          d1 = cos(a.value);
          d2 = -self;
        } else {
          d1 = -sin(a.value);
          d2 = -self;
        }
        for (int i = 0; i < dim_; ++i) out.grad[i] = zmul(d1, a.grad[i]);
        out.lap = zadd(zmul(d1, a.lap), zmul(d2, znorm2(a.grad)));
        return out;
      }
      case Op::MatMul: {
        Var w(graph_, n.args[0]);
        JetVars x = jet(n.args[1]);
        for (int i = 0; i < dim_; ++i) out.grad[i] = x.grad[i].valid() ? matmul(w, x.grad[i]) : Var{};
        out.lap = x.lap.valid() ? matmul(w, x.lap) : Var{};
        return out;
      }
      case Op::Stack: {
        std::vector<JetVars> parts;
        for (NodeId a : n.args) parts.push_back(a == kZero ? JetVars{} : jet(a));
        auto stack_component = [&](auto pick) -> Var {
          std::vector<Var> comps;
          bool any = false;
          for (std::size_t k = 0; k < parts.size(); ++k) {
            Var c = n.args[k] == kZero ? Var{} : pick(parts[k]);
            any = any || c.valid();
            comps.push_back(c);
          }
          return any ? graph_->stack(comps, n.stack_rows) : Var{};
        };
        for (int i = 0; i < dim_; ++i) out.grad[i] = stack_component([i](const JetVars& p) { return p.grad[i]; });
        out.lap = stack_component([](const JetVars& p) { return p.lap; });
        return out;
      }
    }
    throw InvalidArgument(std::string("no jet rule for ") + op_name(n.op));
  }

  Graph* graph_;
  int dim_;
  std::vector<std::optional<JetVars>> memo_;
};

/// Convenience: jet of a single expression with a fresh memo table.
inline JetVars spatial_jet(Var u) {
  JetBuilder b(graph_of(u));
  return b(u);
}

/// Laplacian node of `j`, materializing a structural zero as a constant.
inline Var laplacian_of(const JetVars& j) {
  return j.lap.valid() ? j.lap : graph_of(j.value).constant(0.0);
}

}  // namespace pmnn::ad
