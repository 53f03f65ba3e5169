#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "pmnn/problems.hpp"
#include "pmnn/sampling.hpp"
#include "support.hpp"

using namespace pmnn;

namespace {

constexpr double kPi = std::numbers::pi;

double trial_at(const TrialFunction& t, const Eigen::VectorXd& x, const Eigen::VectorXd& params) {
  return evaluate_trial(t, Eigen::ArrayXXd(x.array()), params)(0);
}

// The exact eigenfunctions as graph nodes, for feeding operator_expr.
ad::Var sines(std::span<const ad::Var> x, int mode = 1) {
  ad::Var u = ad::sin(mode * kPi * x[0]);
  for (std::size_t i = 1; i < x.size(); ++i) u = u * ad::sin(mode * kPi * x[i]);
  return u;
}

}  // namespace

TEST(Dirichlet, ZeroOnTheBoundary) {
  for (int d : {1, 2, 5}) {
    const Mlp net = init_mlp({d, 10, 10, 1}, 3);
    const TrialFunction t = wrap_trial(net, BoundarySpec::dirichlet_unit_box());
    std::mt19937_64 rng(d);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    Eigen::ArrayXXd pts(d, 400);
    for (Eigen::Index c = 0; c < pts.cols(); ++c) {
      for (int i = 0; i < d; ++i) pts(i, c) = unit(rng);
      pts(c % d, c) = (c / d) % 2 ? 1.0 : 0.0;
    }
    const Eigen::ArrayXd u = evaluate_trial(t, pts, net.params);
    EXPECT_LE(u.abs().maxCoeff(), 1e-15) << "d=" << d;
    // and not trivially zero inside
    EXPECT_GT(std::abs(trial_at(t, Eigen::VectorXd::Constant(d, 0.5), net.params)), 0.0);
  }
}

TEST(Dirichlet, GeneralLiftMatchesBoundaryData) {
  auto phi = [](std::span<const ad::Var> x) { return x[0] * (1.0 - x[0]); };
  auto g = [](std::span<const ad::Var> x) { return 2.0 + x[0]; };
  const Mlp net = init_mlp({1, 8, 1}, 2);
  const TrialFunction t = wrap_trial(net, BoundarySpec::dirichlet(phi, g));
  EXPECT_DOUBLE_EQ(trial_at(t, Eigen::VectorXd::Constant(1, 0.0), net.params), 2.0);
  EXPECT_DOUBLE_EQ(trial_at(t, Eigen::VectorXd::Constant(1, 1.0), net.params), 3.0);
}

TEST(Periodic, InvariantUnderPeriodShift) {
  for (int d : {1, 2, 3}) {
    const int k = 3;
    const Mlp net = init_mlp({2 * d * k, 12, 12, 1}, 5);
    const TrialFunction t =
        wrap_trial(net, BoundarySpec::periodic(std::vector<double>(d, 2 * kPi), k));
    std::mt19937_64 rng(d);
    std::uniform_real_distribution<double> u(0.0, 2 * kPi);
    for (int trial = 0; trial < 50; ++trial) {
      Eigen::VectorXd x(d);
      for (int i = 0; i < d; ++i) x[i] = u(rng);
      const double base = trial_at(t, x, net.params);
      for (int i = 0; i < d; ++i) {
        Eigen::VectorXd y = x;
        y[i] += 2 * kPi;
        EXPECT_NEAR(trial_at(t, y, net.params), base, 1e-12);
      }
    }
  }
}

TEST(Periodic, WidthMismatchNamesExpectedWidth) {
  const Mlp net = init_mlp({5, 4, 1}, 1);
  try {
    wrap_trial(net, BoundarySpec::periodic({2 * kPi}, 3));
    FAIL() << "expected a dimension error";
  } catch (const DimensionError& e) {
    EXPECT_NE(std::string(e.what()).find("width 6"), std::string::npos) << e.what();
  }
  EXPECT_THROW(BoundarySpec::periodic({2 * kPi}, 0), InvalidArgument);
}

TEST(Operators, MatchFiniteDifferencesOnWrappedNetwork) {
  const Mlp net = init_mlp({2, 8, 8, 1}, 4);
  const TrialFunction t = wrap_trial(net, BoundarySpec::dirichlet_unit_box());
  auto u = [&](const Eigen::VectorXd& x) { return trial_at(t, x, net.params); };
  Eigen::VectorXd x(2);
  x << 0.31, 0.67;
  const double lap = pmnn::testing::fd_laplacian(u, x);
  EXPECT_NEAR(apply_operator(OperatorSpec::neg_laplacian(), t, x, net.params), -lap, 1e-6);
  EXPECT_NEAR(apply_operator(OperatorSpec::laplacian_plus_constant(100.0), t, x, net.params), lap + 100.0 * u(x),
              1e-6);
  EXPECT_NEAR(apply_operator(OperatorSpec::neg_laplacian().shifted(7.0), t, x, net.params), -lap - 7.0 * u(x),
              1e-6);
}

TEST(Operators, FokkerPlanckMatchesFiniteDifferences) {
  const int d = 2;
  const PotentialSpec v = PotentialSpec::with_defaults(d);
  const Mlp net = init_mlp({2 * d * 2, 8, 1}, 6);
  const TrialFunction t = wrap_trial(net, BoundarySpec::periodic({2 * kPi, 2 * kPi}, 2));
  auto u = [&](const Eigen::VectorXd& x) { return trial_at(t, x, net.params); };
  auto pot = [&](const Eigen::VectorXd& x) { return v.value(x); };
  Eigen::VectorXd x(2);
  x << 1.3, 4.1;
  const Eigen::VectorXd gu = pmnn::testing::fd_gradient(u, x, 1e-5);
  const Eigen::VectorXd gv = pmnn::testing::fd_gradient(pot, x, 1e-5);
  const double want = -pmnn::testing::fd_laplacian(u, x) - gv.dot(gu) - pmnn::testing::fd_laplacian(pot, x) * u(x);
  EXPECT_NEAR(apply_operator(OperatorSpec::fokker_planck(v), t, x, net.params), want, 1e-6);
}

// The sign convention of the operator has to make exp(-V) a null vector.
TEST(Operators, FokkerPlanckAnnihilatesExpMinusPotential) {
  for (int d : {1, 2, 5}) {
    const PotentialSpec v = PotentialSpec::with_defaults(d);
    std::mt19937_64 rng(d);
    std::uniform_real_distribution<double> unif(0.0, 2 * kPi);
    for (int trial = 0; trial < 5; ++trial) {
      Eigen::VectorXd x(d);
      for (int i = 0; i < d; ++i) x[i] = unif(rng);
      auto ue = [&](const Eigen::VectorXd& y) { return std::exp(-v.value(y)); };
      auto pot = [&](const Eigen::VectorXd& y) { return v.value(y); };
      const double lu = -pmnn::testing::fd_laplacian(ue, x) -
                        pmnn::testing::fd_gradient(pot, x, 1e-5).dot(pmnn::testing::fd_gradient(ue, x, 1e-5)) -
                        pmnn::testing::fd_laplacian(pot, x) * ue(x);
      EXPECT_NEAR(lu, 0.0, 1e-6) << "d=" << d;
    }
  }
}

TEST(Potential, DefaultCoefficientsSpanTheRange) {
  const PotentialSpec p = PotentialSpec::with_defaults(10);
  EXPECT_DOUBLE_EQ(p.coefficients.front(), 0.1);
  EXPECT_DOUBLE_EQ(p.coefficients.back(), 1.0);
  EXPECT_DOUBLE_EQ(PotentialSpec::with_defaults(1).coefficients[0], 0.1);
  EXPECT_THROW(OperatorSpec::fokker_planck(PotentialSpec{{0.05}}), InvalidArgument);
}

TEST(Rayleigh, ScaleInvariant) {
  const Mlp net = init_mlp({1, 10, 1}, 8);
  const TrialFunction t = wrap_trial(net, BoundarySpec::dirichlet_unit_box());
  const SampleSet s = lhs_sample(300, 1, Box::cube(1, 0, 1), 2);
  const OperatorGraph og = build_operator_graph(OperatorSpec::neg_laplacian(), t);
  ad::Evaluator ev(*og.graph, {og.u, og.lu});
  ev.forward(s.points, net.params);
  const Eigen::ArrayXd u = ev.value(og.u).row(0).transpose();
  const Eigen::ArrayXd lu = ev.value(og.lu).row(0).transpose();
  const double q = rayleigh_quotient(lu, u);
  for (double c : {0.25, 8.0, -2.0, 1024.0}) EXPECT_EQ(rayleigh_quotient(c * lu, c * u), q);
  EXPECT_NEAR(rayleigh_quotient(3.7 * lu, 3.7 * u), q, 1e-14 * std::abs(q));
  EXPECT_THROW(rayleigh_quotient(lu, Eigen::ArrayXd::Zero(u.size())), DegenerateError);
}

TEST(Rayleigh, ShiftEquivariant) {
  const Mlp net = init_mlp({2, 10, 10, 1}, 9);
  const TrialFunction t = wrap_trial(net, BoundarySpec::dirichlet_unit_box());
  const SampleSet s = lhs_sample(500, 2, Box::cube(2, 0, 1), 3);
  for (const OperatorSpec& op : {OperatorSpec::neg_laplacian(), OperatorSpec::laplacian_plus_constant(100.0)}) {
    const double q = rayleigh_quotient(op, t, s, net.params);
    for (double alpha : {-1.0, 36.0, 225.0}) {
      const double qs = rayleigh_quotient(op.shifted(alpha), t, s, net.params);
      EXPECT_NEAR(qs, q - alpha, 1e-12 * std::max(1.0, std::abs(q)));
    }
  }
}

class RayleighOfSines : public ::testing::TestWithParam<int> {};

TEST_P(RayleighOfSines, GivesDPiSquared) {
  const int d = GetParam();
  const SampleSet s = lhs_sample(10000, d, Box::cube(d, 0, 1), 17);
  ad::Graph g(d);
  std::vector<ad::Var> c = g.coordinates();
  ad::Var u = sines(c);
  ad::JetBuilder jets(g);
  ad::Var lu = operator_expr(OperatorSpec::neg_laplacian(), jets, u, c);
  ad::Evaluator ev(g, {u, lu});
  ev.forward(s.points, Eigen::VectorXd());
  const double q = rayleigh_quotient(Eigen::ArrayXd(ev.value(lu).row(0).transpose()),
                                     Eigen::ArrayXd(ev.value(u).row(0).transpose()));
  EXPECT_NEAR(q, d * kPi * kPi, 1e-3);
}

INSTANTIATE_TEST_SUITE_P(Dimensions, RayleighOfSines, ::testing::Values(1, 2, 5, 10));

TEST(Exact, CatalogValues) {
  Eigen::ArrayXXd p(2, 1);
  p << 0.5, 0.25;
  EXPECT_NEAR(product_of_sines(p)(0), std::sin(kPi * 0.25), 1e-15);
  EXPECT_NEAR(product_of_sines(p, 2)(0), 0.0, 1e-15);
  const ExactSolution e = exact_exp_neg_potential(PotentialSpec::with_defaults(2));
  EXPECT_EQ(e.lambda, 0.0);
  EXPECT_NEAR(e.eigenfunction(p)(0), std::exp(-std::sin(0.1 * std::cos(0.5) + 1.0 * std::cos(0.25))), 1e-15);
}
