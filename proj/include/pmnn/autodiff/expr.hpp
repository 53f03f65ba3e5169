#pragma once

#include <Eigen/Dense>

#include <memory>
#include <vector>

#include "pmnn/autodiff/evaluator.hpp"
#include "pmnn/autodiff/graph.hpp"
#include "pmnn/autodiff/jet.hpp"

namespace pmnn::ad {

/// A graph together with a distinguished output node.
struct Expr {
  std::shared_ptr<Graph> graph;
  Var root;

  int arity() const { return graph->arity(); }
};

/// Builds an Expr over `arity` coordinates from a callable taking
/// (Graph&, std::span<const Var> coords) and returning the output Var.
template <class Build>
Expr make_expr(int arity, Build&& build) {
  auto g = std::make_shared<Graph>(arity);
  std::vector<Var> coords = g->coordinates();
  Var root = build(*g, std::span<const Var>(coords));
  return Expr{std::move(g), root};
}

/// Numeric jet at a single point.
struct SpatialJet {
  double value = 0.0;
  Eigen::VectorXd gradient;
  double laplacian = 0.0;
};

inline Array as_column(const Eigen::VectorXd& point) { return point.array(); }

/// u(x; theta) at one point.
inline double evaluate(const Expr& e, const Eigen::VectorXd& point, const Eigen::VectorXd& params) {
  Evaluator ev(*e.graph, {e.root});
  ev.forward(as_column(point), params);
  const Array& v = ev.value(e.root);
  if (v.size() != 1) throw DimensionError("expression output is not scalar");
  return v(0, 0);
}

/// u(x_j; theta) for every column x_j of `points` (arity x N).
inline Eigen::ArrayXd evaluate_batch(const Expr& e, const Array& points, const Eigen::VectorXd& params) {
  Evaluator ev(*e.graph, {e.root});
  ev.forward(points, params);
  const Array& v = ev.value(e.root);
  if (v.rows() != 1) throw DimensionError("expression output is not scalar");
  if (v.cols() == points.cols()) return v.row(0).transpose();
  return Eigen::ArrayXd::Constant(points.cols(), v(0, 0));
}

/// Jet nodes of the expression's root, appended to its graph.
inline JetVars jet_vars(const Expr& e) { return spatial_jet(e.root); }

inline SpatialJet spatial_jet(const Expr& e, const Eigen::VectorXd& point, const Eigen::VectorXd& params) {
  JetVars j = jet_vars(e);
  std::vector<NodeId> roots{j.value.id()};
  for (const Var& g : j.grad)
    if (g.valid()) roots.push_back(g.id());
  if (j.lap.valid()) roots.push_back(j.lap.id());
  Evaluator ev(*e.graph, roots);
  ev.forward(as_column(point), params);
  auto scalar_at = [&](Var v) {
    if (!v.valid()) return 0.0;
    const Array& a = ev.value(v);
    return a(0, 0);
  };
  SpatialJet out;
  out.value = scalar_at(j.value);
  out.gradient.resize(e.arity());
  for (int i = 0; i < e.arity(); ++i) out.gradient[i] = scalar_at(j.grad[i]);
  out.laplacian = scalar_at(j.lap);
  return out;
}

/// d(scalar)/d(theta); `points` feeds the coordinates when the scalar
/// aggregates over a batch (pass a 0-column array when it has no coordinates).
inline Eigen::VectorXd param_gradient(const Expr& scalar, const Array& points,
                                      const Eigen::VectorXd& params) {
  Evaluator ev(*scalar.graph, {scalar.root});
  ev.forward(points, params);
  return ev.gradient(scalar.root, params.size());
}

}  // namespace pmnn::ad
