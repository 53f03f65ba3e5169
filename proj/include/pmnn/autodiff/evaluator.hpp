#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <span>
#include <string>
#include <vector>

#include "pmnn/autodiff/graph.hpp"

namespace pmnn::ad {

namespace detail {

using Index = Eigen::Index;
using RowMajorMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

inline void check_broadcast(const Array& a, const Array& b, Op op) {
  const bool rows_ok = a.rows() == b.rows() || a.rows() == 1 || b.rows() == 1;
  const bool cols_ok = a.cols() == b.cols() || a.cols() == 1 || b.cols() == 1;
  if (!rows_ok || !cols_ok)
    throw DimensionError(std::string("cannot broadcast operands of ") + op_name(op) + ": " +
                         std::to_string(a.rows()) + "x" + std::to_string(a.cols()) + " vs " +
                         std::to_string(b.rows()) + "x" + std::to_string(b.cols()));
}

template <class F>
void broadcast_apply(const Array& a, const Array& b, Array& out, F&& f) {
  const Index r = std::max(a.rows(), b.rows());
  const Index c = std::max(a.cols(), b.cols());
  const bool a_full = a.rows() == r && a.cols() == c;
  const bool b_full = b.rows() == r && b.cols() == c;
  if (a_full && b_full) {
    out = f(a, b);
  } else if (a_full) {
    out = f(a, b.replicate(r / b.rows(), c / b.cols()));
  } else if (b_full) {
    out = f(a.replicate(r / a.rows(), c / a.cols()), b);
  } else {
    out = f(a.replicate(r / a.rows(), c / a.cols()), b.replicate(r / b.rows(), c / b.cols()));
  }
}

/// tanh through the vectorized exponential (Eigen's double tanh is scalar).
/// Exact at 0, saturates to +-1 without overflow trouble, absolute error a
/// few ulps.
inline Array tanh(const Array& x) { return 1.0 - 2.0 / ((2.0 * x).exp() + 1.0); }

/// Sums `g` down to a (rows x cols) operand that was broadcast into it.
inline Array reduce_to(const Array& g, Index rows, Index cols) {
  if (g.rows() == rows && g.cols() == cols) return g;
  if (rows == 1 && cols == 1) return Array::Constant(1, 1, g.sum());
  if (cols == 1 && rows == g.rows()) return g.rowwise().sum();
  if (rows == 1 && cols == g.cols()) return g.colwise().sum();
  throw DimensionError("adjoint shape cannot be reduced");
}

}  // namespace detail

/// Evaluates the ancestors of a fixed set of root nodes and back-propagates
/// parameter gradients from a scalar root. The graph is only read, so any
/// number of evaluators may share one graph. Storage is reused between calls
/// with equally shaped inputs.
class Evaluator {
 public:
  Evaluator(const Graph& graph, std::span<const NodeId> roots) : graph_(&graph) {
    const std::size_t n = graph.size();
    needed_.assign(n, 0);
    for (NodeId r : roots) {
      if (r < 0 || static_cast<std::size_t>(r) >= n) throw InvalidArgument("root outside graph");
      needed_[r] = 1;
    }
    for (std::size_t k = n; k-- > 0;) {
      if (!needed_[k]) continue;
      for (NodeId a : graph.node(static_cast<NodeId>(k)).args)
        if (a != kZero) needed_[a] = 1;
    }
    values_.resize(n);
    adjoints_.resize(n);
    has_adjoint_.assign(n, 0);
  }

  Evaluator(const Graph& graph, std::initializer_list<Var> roots)
      : Evaluator(graph, ids_of(roots)) {}

  /// `coords` is arity x N; `data[s]` feeds Data nodes of slot s.
  void forward(const Array& coords, std::span<const Array> data, const Eigen::VectorXd& params) {
    const Graph& g = *graph_;
    if (coords.rows() != g.arity())
      throw DimensionError("point dimension " + std::to_string(coords.rows()) +
                           " does not match expression arity " + std::to_string(g.arity()));
    if (params.size() < g.parameter_extent())
      throw DimensionError("parameter vector has " + std::to_string(params.size()) +
                           " entries, graph reads " + std::to_string(g.parameter_extent()));

    // Nodes that depend only on coordinates and constants are kept from the
    // previous call when the coordinate feed is unchanged.
    const bool reuse = static_valid_ && coords.rows() == last_coords_.rows() &&
                       coords.cols() == last_coords_.cols() && (coords == last_coords_).all();
    if (!reuse) last_coords_ = coords;
    static_valid_ = false;

    for (std::size_t k = 0; k < g.size(); ++k) {
      if (!needed_[k]) continue;
      const Node& n = g.node(static_cast<NodeId>(k));
      if (reuse && !n.dynamic) continue;
      Array& out = values_[k];
      auto arg = [&](int i) -> const Array& { return values_[n.args[i]]; };
      switch (n.op) {
        case Op::Coordinate: out = coords.row(n.index); break;
        case Op::Data:
          if (n.index >= static_cast<int>(data.size()))
            throw DimensionError("missing data feed " + std::to_string(n.index));
          out = data[n.index];
          break;
        case Op::Parameter:
          out = Eigen::Map<const detail::RowMajorMatrix>(params.data() + n.index, n.rows, n.cols)
                    .array();
          break;
        case Op::Constant: out = n.constant; break;
        case Op::Add:
          binary(arg(0), arg(1), out, n.op, [](const auto& x, const auto& y) { return x + y; });
          break;
        case Op::Sub:
          binary(arg(0), arg(1), out, n.op, [](const auto& x, const auto& y) { return x - y; });
          break;
        case Op::Mul:
          binary(arg(0), arg(1), out, n.op, [](const auto& x, const auto& y) { return x * y; });
          break;
        case Op::Div:
          binary(arg(0), arg(1), out, n.op, [](const auto& x, const auto& y) { return x / y; });
          break;
        case Op::Neg: out = -arg(0); break;
        case Op::Scale: out = n.scalar * arg(0); break;
        case Op::Offset: out = arg(0) + n.scalar; break;
        case Op::Square: out = arg(0).square(); break;
        case Op::Sqrt: out = arg(0).sqrt(); break;
        case Op::Tanh: out = detail::tanh(arg(0)); break;
        case Op::Sin: out = arg(0).sin(); break;
        case Op::Cos: out = arg(0).cos(); break;
        case Op::MatMul: {
          const Array& w = arg(0);
          const Array& x = arg(1);
          if (w.cols() != x.rows())
            throw DimensionError("matmul inner dimensions " + std::to_string(w.cols()) + " vs " +
                                 std::to_string(x.rows()));
          out.resize(w.rows(), x.cols());
          out.matrix().noalias() = w.matrix() * x.matrix();
          break;
        }
        case Op::Stack: stack_forward(n, out); break;
        case Op::Mean: out = Array::Constant(1, 1, arg(0).mean()); break;
        case Op::Sum: out = Array::Constant(1, 1, arg(0).sum()); break;
        case Op::Detach: out = arg(0); break;
      }
    }
    static_valid_ = true;
  }

  void forward(const Array& coords, const Eigen::VectorXd& params) {
    forward(coords, std::span<const Array>{}, params);
  }

  const Array& value(NodeId id) const {
    if (!needed_.at(id)) throw InvalidArgument("node was not requested from this evaluator");
    return values_[id];
  }
  const Array& value(Var v) const { return value(v.id()); }

  double scalar(Var v) const {
    const Array& a = value(v);
    if (a.size() != 1) throw DimensionError("expression is not scalar");
    return a(0, 0);
  }

  /// d(root)/d(params) by reverse accumulation over everything forward()
  /// computed. `root` must evaluate to a 1x1 value.
  Eigen::VectorXd gradient(NodeId root, Eigen::Index param_count) {
    const Graph& g = *graph_;
    if (!needed_.at(root)) throw InvalidArgument("root was not requested from this evaluator");
    if (values_[root].size() != 1)
      throw DimensionError("parameter gradient requires a scalar root, got " +
                           std::to_string(values_[root].rows()) + "x" +
                           std::to_string(values_[root].cols()));
    Eigen::VectorXd grad = Eigen::VectorXd::Zero(param_count);
    std::fill(has_adjoint_.begin(), has_adjoint_.end(), 0);
    if (!g.node(root).on_params) return grad;
    adjoints_[root] = Array::Ones(1, 1);
    has_adjoint_[root] = 1;

    for (NodeId k = root; k >= 0; --k) {
      if (!has_adjoint_[k]) continue;
      const Node& n = g.node(k);
      if (!n.on_params) continue;
      const Array& gk = adjoints_[k];
      auto arg = [&](int i) -> const Array& { return values_[n.args[i]]; };
      switch (n.op) {
        case Op::Parameter: {
          if (n.index + n.rows * n.cols > param_count)
            throw DimensionError("parameter block outside gradient vector");
          Eigen::Map<detail::RowMajorMatrix>(grad.data() + n.index, n.rows, n.cols) +=
              detail::reduce_to(gk, n.rows, n.cols).matrix();
          break;
        }
        case Op::Coordinate:
        case Op::Data:
        case Op::Constant:
        case Op::Detach:
          break;
        case Op::Add:
          accum(n.args[0], gk);
          accum(n.args[1], gk);
          break;
        case Op::Sub:
          accum(n.args[0], gk);
          accum(n.args[1], -gk);
          break;
        case Op::Mul:
          accum_product(n.args[0], gk, arg(1));
          accum_product(n.args[1], gk, arg(0));
          break;
        case Op::Div: {
          if (!wants(n.args[0]) && !wants(n.args[1])) break;
          Array t;
          detail::broadcast_apply(gk, arg(1), t, [](const auto& x, const auto& y) { return x / y; });
          if (wants(n.args[1])) accum_product(n.args[1], Array(-t), values_[k]);
          accum(n.args[0], t);
          break;
        }
        case Op::Neg: accum(n.args[0], -gk); break;
        case Op::Scale: accum(n.args[0], n.scalar * gk); break;
        case Op::Offset: accum(n.args[0], gk); break;
        case Op::Square: accum(n.args[0], 2.0 * arg(0) * gk); break;
        case Op::Sqrt: accum(n.args[0], 0.5 * gk / values_[k]); break;
        case Op::Tanh: accum(n.args[0], gk * (1.0 - values_[k].square())); break;
        case Op::Sin: accum(n.args[0], gk * arg(0).cos()); break;
        case Op::Cos: accum(n.args[0], -gk * arg(0).sin()); break;
        case Op::MatMul: {
          const Array& w = arg(0);
          const Array& x = arg(1);
          if (wants(n.args[0])) {
            if (x.cols() == gk.cols()) {
              accum_matmul(n.args[0], gk.matrix() * x.matrix().transpose(), w.rows(), w.cols());
            } else {
              // x was a single column broadcast over the batch
              Array t = detail::reduce_to(gk, gk.rows(), 1);
              accum_matmul(n.args[0], t.matrix() * x.matrix().transpose(), w.rows(), w.cols());
            }
          }
          if (wants(n.args[1])) {
            if (x.cols() == gk.cols())
              accum_matmul(n.args[1], w.matrix().transpose() * gk.matrix(), x.rows(), x.cols());
            else
              accum(n.args[1], Array(w.matrix().transpose() * gk.matrix()));
          }
          break;
        }
        case Op::Stack: {
          Eigen::Index row = 0;
          for (std::size_t i = 0; i < n.args.size(); ++i) {
            const int r = n.stack_rows[i];
            if (n.args[i] != kZero) accum(n.args[i], gk.middleRows(row, r));
            row += r;
          }
          break;
        }
        case Op::Mean: {
          const Array& a = arg(0);
          accum(n.args[0], Array::Constant(a.rows(), a.cols(), gk(0, 0) / static_cast<double>(a.size())));
          break;
        }
        case Op::Sum: {
          const Array& a = arg(0);
          accum(n.args[0], Array::Constant(a.rows(), a.cols(), gk(0, 0)));
          break;
        }
      }
    }
    return grad;
  }

  Eigen::VectorXd gradient(Var root, Eigen::Index param_count) { return gradient(root.id(), param_count); }

 private:
  static std::vector<NodeId> ids_of(std::initializer_list<Var> vars) {
    std::vector<NodeId> ids;
    for (const Var& v : vars) ids.push_back(v.id());
    return ids;
  }

  template <class F>
  static void binary(const Array& a, const Array& b, Array& out, Op op, F&& f) {
    detail::check_broadcast(a, b, op);
    detail::broadcast_apply(a, b, out, std::forward<F>(f));
  }

  void stack_forward(const Node& n, Array& out) {
    Eigen::Index rows = 0;
    Eigen::Index cols = 1;
    for (std::size_t i = 0; i < n.args.size(); ++i) {
      rows += n.stack_rows[i];
      if (n.args[i] != kZero) {
        const Array& a = values_[n.args[i]];
        if (a.rows() != n.stack_rows[i]) throw DimensionError("stack part has unexpected row count");
        if (a.cols() != 1) {
          if (cols != 1 && cols != a.cols()) throw DimensionError("stack parts disagree on batch size");
          cols = a.cols();
        }
      }
    }
    out.resize(rows, cols);
    Eigen::Index row = 0;
    for (std::size_t i = 0; i < n.args.size(); ++i) {
      const int r = n.stack_rows[i];
      if (n.args[i] == kZero) {
        out.middleRows(row, r).setZero();
      } else {
        const Array& a = values_[n.args[i]];
        if (a.cols() == cols)
          out.middleRows(row, r) = a;
        else
          out.middleRows(row, r) = a.replicate(1, cols);
      }
      row += r;
    }
  }

  bool wants(NodeId id) const { return id != kZero && graph_->node(id).on_params; }

  /// Adds `g` (shaped like the consumer) into the adjoint of `id`, summing
  /// over any dimension along which `id` was broadcast. `g` may be an Eigen
  /// expression; it is evaluated straight into the adjoint when shapes agree.
  template <class E>
  void accum(NodeId id, const E& g) {
    if (!wants(id)) return;
    const Array& v = values_[id];
    Array& adj = adjoints_[id];
    if (g.rows() == v.rows() && g.cols() == v.cols()) {
      if (has_adjoint_[id])
        adj += g;
      else
        adj = g;
    } else {
      Array r = detail::reduce_to(Array(g), v.rows(), v.cols());
      if (has_adjoint_[id])
        adj += r;
      else
        adj = std::move(r);
    }
    has_adjoint_[id] = 1;
  }

  void accum_product(NodeId id, const Array& g, const Array& other) {
    if (!wants(id)) return;
    if (g.rows() == other.rows() && g.cols() == other.cols()) {
      accum(id, g * other);
    } else {
      Array t;
      detail::broadcast_apply(g, other, t, [](const auto& x, const auto& y) { return x * y; });
      accum(id, t);
    }
  }

  template <class E>
  void accum_matmul(NodeId id, const E& product, Eigen::Index rows, Eigen::Index cols) {
    Array& adj = adjoints_[id];
    if (has_adjoint_[id]) {
      adj.matrix().noalias() += product;
    } else {
      adj.resize(rows, cols);
      adj.matrix().noalias() = product;
      has_adjoint_[id] = 1;
    }
  }

  const Graph* graph_;
  std::vector<char> needed_;
  std::vector<Array> values_;
  std::vector<Array> adjoints_;
  std::vector<char> has_adjoint_;
  Array last_coords_;
  bool static_valid_ = false;
};

}  // namespace pmnn::ad
