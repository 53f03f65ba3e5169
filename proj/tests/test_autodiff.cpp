#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "pmnn/autodiff/evaluator.hpp"
#include "pmnn/autodiff/expr.hpp"
#include "pmnn/autodiff/jet.hpp"
#include "support.hpp"

using namespace pmnn;
using namespace pmnn::ad;
using pmnn::testing::fd_gradient;
using pmnn::testing::fd_laplacian;

namespace {

constexpr double kPi = std::numbers::pi;

Array column(std::initializer_list<double> v) {
  Array a(static_cast<Eigen::Index>(v.size()), 1);
  Eigen::Index i = 0;
  for (double x : v) a(i++, 0) = x;
  return a;
}

// A mixed expression that touches every elementwise op, so gradient and jet
// checks exercise all of them at once.
Expr composite() {
  return make_expr(2, [](Graph& g, std::span<const Var> x) {
    Var w = g.parameter(0, 3, 2);
    Var b = g.parameter(6, 3, 1);
    Var v = g.parameter(9, 1, 3);
    Var h = tanh(matmul(w, stack_rows(x)) + b);
    Var s = sin(h) * cos(0.5 * h) + square(h) / (2.0 + h * h);
    Var r = matmul(v, s) + sqrt(1.5 + square(x[0] - 0.3 * x[1]));
    return -(0.7 * r) + 1.0 - x[1];
  });
}

Eigen::VectorXd composite_params() {
  Eigen::VectorXd p(12);
  p << 0.3, -0.8, 1.1, 0.4, -0.5, 0.9, 0.1, -0.2, 0.3, 0.7, -1.3, 0.6;
  return p;
}

}  // namespace

TEST(Graph, FlagsPropagate) {
  Graph g(1);
  Var x = g.coordinate(0);
  Var p = g.parameter(0, 1, 1);
  Var c = g.constant(2.0);
  EXPECT_TRUE(g.node((x * p).id()).on_params);
  EXPECT_TRUE(g.node((x * p).id()).on_coords);
  EXPECT_FALSE(g.node((c * p).id()).on_coords);
  EXPECT_FALSE(g.node(detach(x * p).id()).on_params);
  EXPECT_TRUE(g.node(detach(x * p).id()).on_coords);
  EXPECT_FALSE(g.node(mean(x * p).id()).on_coords);
  EXPECT_EQ(g.parameter_extent(), 1);
}

TEST(Graph, RejectsBadOperands) {
  Graph g(1), other(1);
  EXPECT_THROW(g.coordinate(1), DimensionError);
  EXPECT_THROW(g.coordinate(0) + other.coordinate(0), InvalidArgument);
  EXPECT_THROW(matmul(g.coordinate(0), g.constant(1.0)), InvalidArgument);
  EXPECT_THROW(Var{} + 1.0, InvalidArgument);
}

TEST(Evaluator, HandComputedValues) {
  Graph g(2);
  Var x = g.coordinate(0);
  Var y = g.coordinate(1);
  Var f = square(x) * y - x / y + 3.0;
  Evaluator ev(g, {f});
  Array pts(2, 3);
  pts << 1.0, 2.0, -1.0,  //
      2.0, 4.0, 0.5;
  ev.forward(pts, Eigen::VectorXd());
  const Array& v = ev.value(f);
  EXPECT_DOUBLE_EQ(v(0, 0), 1.0 * 2.0 - 0.5 + 3.0);
  EXPECT_DOUBLE_EQ(v(0, 1), 4.0 * 4.0 - 0.5 + 3.0);
  EXPECT_DOUBLE_EQ(v(0, 2), 1.0 * 0.5 + 2.0 + 3.0);
}

TEST(Evaluator, MatMulAndBroadcastBias) {
  Graph g(2);
  Var w = g.parameter(0, 2, 2);  // row-major [[1,2],[3,4]]
  Var b = g.parameter(4, 2, 1);
  Var out = matmul(w, stack_rows(g.coordinates())) + b;
  Evaluator ev(g, {out});
  Eigen::VectorXd p(6);
  p << 1, 2, 3, 4, 10, 20;
  ev.forward(column({1.0, -1.0}), p);
  EXPECT_DOUBLE_EQ(ev.value(out)(0, 0), 1 - 2 + 10);
  EXPECT_DOUBLE_EQ(ev.value(out)(1, 0), 3 - 4 + 20);
}

TEST(Evaluator, TanhMatchesStd) {
  Graph g(1);
  Var t = tanh(g.coordinate(0));
  Evaluator ev(g, {t});
  Array x(1, 9);
  x << -800.0, -20.0, -1.0, -1e-9, 0.0, 1e-9, 0.5, 19.0, 800.0;
  ev.forward(x, Eigen::VectorXd());
  for (Eigen::Index j = 0; j < x.cols(); ++j) EXPECT_NEAR(ev.value(t)(0, j), std::tanh(x(0, j)), 4e-16);
  EXPECT_EQ(ev.value(t)(0, 4), 0.0);
}

TEST(Evaluator, DimensionErrors) {
  Graph g(2);
  Var f = g.coordinate(0) * g.parameter(0, 1, 1);
  Evaluator ev(g, {f});
  EXPECT_THROW(ev.forward(Array::Zero(3, 4), Eigen::VectorXd::Zero(1)), DimensionError);
  EXPECT_THROW(ev.forward(Array::Zero(2, 4), Eigen::VectorXd()), DimensionError);

  Graph h(1);
  Var bad = h.constant(Array::Zero(3, 1)) + h.constant(Array::Zero(2, 1));
  Evaluator eh(h, {bad});
  EXPECT_THROW(eh.forward(Array::Zero(1, 1), Eigen::VectorXd()), DimensionError);

  Graph d(1);
  Var feed = d.data(0) * d.coordinate(0);
  Evaluator ed(d, {feed});
  EXPECT_THROW(ed.forward(Array::Zero(1, 2), Eigen::VectorXd()), DimensionError);
}

TEST(Evaluator, RecomputesWhenCoordinatesChange) {
  Graph g(1);
  Var f = sin(g.coordinate(0)) * g.parameter(0, 1, 1);
  Evaluator ev(g, {f});
  Eigen::VectorXd p(1);
  p << 2.0;
  ev.forward(column({0.5}).transpose(), p);
  EXPECT_DOUBLE_EQ(ev.value(f)(0, 0), 2.0 * std::sin(0.5));
  p << 3.0;
  ev.forward(column({0.5}).transpose(), p);
  EXPECT_DOUBLE_EQ(ev.value(f)(0, 0), 3.0 * std::sin(0.5));
  ev.forward(column({1.5}).transpose(), p);
  EXPECT_DOUBLE_EQ(ev.value(f)(0, 0), 3.0 * std::sin(1.5));
}

TEST(Gradient, MatchesFiniteDifferences) {
  Expr e = composite();
  Array pts(2, 5);
  pts << 0.1, 0.4, -0.7, 0.9, 0.25,  //
      0.3, -0.2, 0.6, 0.8, -0.9;
  Graph& g = *e.graph;
  Var loss = mean(square(e.root)) + sum(e.root) * 0.01;
  Expr scalar{e.graph, loss};
  const Eigen::VectorXd p = composite_params();
  const Eigen::VectorXd grad = param_gradient(scalar, pts, p);
  auto f = [&](const Eigen::VectorXd& q) {
    Evaluator ev(g, {loss});
    ev.forward(pts, q);
    return ev.scalar(loss);
  };
  const Eigen::VectorXd fd = fd_gradient(f, p);
  EXPECT_LT(pmnn::testing::rel_norm_error(grad, fd), 1e-8);
}

TEST(Gradient, DetachBlocksFlow) {
  Graph g(1);
  Var p = g.parameter(0, 1, 1);
  Var x = g.coordinate(0);
  Var loss = mean(square(p * x - detach(2.0 * p * x)));
  Evaluator ev(g, {loss});
  Eigen::VectorXd q(1);
  q << 1.5;
  ev.forward(column({1.0, 2.0}).transpose(), q);
  // d/dp mean((p x - c)^2) with c = 2 p x frozen: mean(2 (p x - c) x)
  const double expected = (2 * (1.5 - 3.0) * 1.0 + 2 * (3.0 - 6.0) * 2.0) / 2.0;
  EXPECT_NEAR(ev.gradient(loss, 1)[0], expected, 1e-14);
}

TEST(Gradient, NeedsScalarRoot) {
  Graph g(1);
  Var f = g.coordinate(0) * g.parameter(0, 1, 1);
  Evaluator ev(g, {f});
  ev.forward(Array::Ones(1, 3), Eigen::VectorXd::Ones(1));
  EXPECT_THROW(ev.gradient(f, 1), DimensionError);
}

TEST(Jet, GradientAndLaplacianMatchFiniteDifferences) {
  Expr e = composite();
  const Eigen::VectorXd p = composite_params();
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int trial = 0; trial < 10; ++trial) {
    Eigen::VectorXd x(2);
    x << u(rng), u(rng);
    auto f = [&](const Eigen::VectorXd& y) { return evaluate(e, y, p); };
    Expr fresh = composite();
    const SpatialJet j = spatial_jet(fresh, x, p);
    EXPECT_NEAR(j.value, f(x), 1e-14);
    const Eigen::VectorXd fdg = fd_gradient(f, x, 1e-5);
    EXPECT_LT((j.gradient - fdg).norm(), 1e-8 * std::max(1.0, fdg.norm()));
    EXPECT_NEAR(j.laplacian, fd_laplacian(f, x, 1e-3), 1e-7 * std::max(1.0, std::abs(j.laplacian)));
  }
}

TEST(Jet, ParameterGradientOfLaplacian) {
  // Reverse mode through the jet nodes: d/dtheta of mean(lap u).
  Expr e = composite();
  JetVars j = jet_vars(e);
  Var loss = mean(square(j.lap));
  Expr scalar{e.graph, loss};
  Array pts(2, 3);
  pts << 0.2, -0.4, 0.7,  //
      0.5, 0.1, -0.3;
  const Eigen::VectorXd p = composite_params();
  const Eigen::VectorXd grad = param_gradient(scalar, pts, p);
  auto f = [&](const Eigen::VectorXd& q) {
    Evaluator ev(*e.graph, {loss});
    ev.forward(pts, q);
    return ev.scalar(loss);
  };
  EXPECT_LT(pmnn::testing::rel_norm_error(grad, fd_gradient(f, p)), 1e-7);
}

class LaplacianOfSines : public ::testing::TestWithParam<int> {};

TEST_P(LaplacianOfSines, EqualsMinusDPiSquaredTimesU) {
  const int d = GetParam();
  Expr e = make_expr(d, [](Graph&, std::span<const Var> x) {
    Var u = sin(kPi * x[0]);
    for (std::size_t i = 1; i < x.size(); ++i) u = u * sin(kPi * x[i]);
    return u;
  });
  JetVars j = jet_vars(e);
  Evaluator ev(*e.graph, {j.value, j.lap});
  std::mt19937_64 rng(11 + d);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  Array pts(d, 1000);
  for (Eigen::Index c = 0; c < pts.cols(); ++c)
    for (int i = 0; i < d; ++i) pts(i, c) = unit(rng);
  ev.forward(pts, Eigen::VectorXd());
  const Array& u = ev.value(j.value);
  const Array& lap = ev.value(j.lap);
  double worst = 0.0;
  for (Eigen::Index c = 0; c < pts.cols(); ++c) {
    const double want = -d * kPi * kPi * u(0, c);
    worst = std::max(worst, std::abs(lap(0, c) - want) / std::abs(want));
  }
  EXPECT_LE(worst, 1e-6);
}

INSTANTIATE_TEST_SUITE_P(Dimensions, LaplacianOfSines, ::testing::Values(1, 2, 5, 10));

TEST(Jet, ConstantsHaveNoSpatialDerivatives) {
  Graph g(2);
  Var p = g.parameter(0, 1, 1);
  JetVars j = spatial_jet(tanh(p) * 3.0);
  EXPECT_FALSE(j.lap.valid());
  for (const Var& v : j.grad) EXPECT_FALSE(v.valid());
  Var lap = laplacian_of(j);
  Evaluator ev(g, {lap});
  ev.forward(Array::Ones(2, 4), Eigen::VectorXd::Ones(1));
  EXPECT_EQ(ev.value(lap).abs().maxCoeff(), 0.0);
}
