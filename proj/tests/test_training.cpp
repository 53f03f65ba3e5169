#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "pmnn/training.hpp"
#include "support.hpp"

using namespace pmnn;

namespace {

constexpr double kPi = std::numbers::pi;

double rel_err(const Eigen::VectorXd& got, const Eigen::VectorXd& want) {
  return (got - want).norm() / want.norm();
}

}  // namespace

TEST(Adam, FirstStepMovesEachParameterByTheLearningRate) {
  AdamState s = AdamState::for_size(3);
  Eigen::VectorXd p(3), g(3);
  p << 1.0, -2.0, 0.5;
  g << 3.0, -1e-3, 40.0;
  const Eigen::VectorXd before = p;
  adam_step(s, p, g, 1e-2);
  for (int i = 0; i < 3; ++i) EXPECT_NEAR(before[i] - p[i], 1e-2 * (g[i] > 0 ? 1 : -1), 1e-6);
}

TEST(Adam, MinimizesAQuadratic) {
  AdamState s = AdamState::for_size(2);
  Eigen::VectorXd p(2);
  p << 3.0, -4.0;
  for (int it = 0; it < 5000; ++it) adam_step(s, p, 2.0 * p, 1e-2);
  EXPECT_LT(p.norm(), 1e-3);
}

TEST(Objectives, PmnnGradientMatchesFrozenTargetDifferences) {
  const Mlp net = init_mlp({1, 5, 5, 1}, 21);
  ASSERT_LE(net.param_count(), 50);
  const TrialFunction trial = wrap_trial(net, BoundarySpec::dirichlet_unit_box());
  const SampleSet s = lhs_sample(64, 1, Box::cube(1, 0, 1), 5);
  const OperatorSpec op = OperatorSpec::laplacian_plus_constant(100.0);
  PmnnObjective obj(trial, op, s);
  obj.loss(net.params);
  const Eigen::ArrayXd lu = obj.lu();
  const Eigen::ArrayXd target = lu / std::sqrt(lu.square().mean());
  const Eigen::VectorXd g = obj.gradient(net.param_count());

  // The target is detached, so the oracle holds it fixed at the base point.
  auto frozen = [&](const Eigen::VectorXd& p) {
    return (evaluate_trial(trial, s.points, p) - target).square().mean();
  };
  EXPECT_LE(rel_err(g, pmnn::testing::fd_gradient(frozen, net.params, 1e-6)), 1e-4);
}

TEST(Objectives, IpmnnGradientMatchesFiniteDifferences) {
  for (bool detach_norm : {false, true}) {
    const Mlp net = init_mlp({1, 5, 5, 1}, 22);
    const TrialFunction trial = wrap_trial(net, BoundarySpec::dirichlet_unit_box());
    const SampleSet s = lhs_sample(64, 1, Box::cube(1, 0, 1), 6);
    IpmnnObjective obj(trial, OperatorSpec::neg_laplacian(), s, detach_norm);
    obj.set_target(normalize(product_of_sines(s.points)));
    const Eigen::VectorXd g = obj.gradient_at(net.params);
    Eigen::VectorXd want;
    if (!detach_norm) {
      want = pmnn::testing::fd_gradient([&](const Eigen::VectorXd& p) { return obj.loss(p); }, net.params, 1e-6);
    } else {
      obj.loss(net.params);
      const double norm = std::sqrt(obj.lu().square().mean());
      const Eigen::ArrayXd tgt = obj.target();
      auto frozen = [&](const Eigen::VectorXd& p) {
        return (apply_operator(OperatorSpec::neg_laplacian(), trial, s.points, p) / norm - tgt).square().mean();
      };
      want = pmnn::testing::fd_gradient(frozen, net.params, 1e-6);
    }
    EXPECT_LE(rel_err(g, want), 1e-4) << "detach_norm=" << detach_norm;
  }
}

TEST(Objectives, IpmnnTargetLengthChecked) {
  const Mlp net = init_mlp({1, 4, 1}, 1);
  const SampleSet s = lhs_sample(10, 1, Box::cube(1, 0, 1), 1);
  IpmnnObjective obj(wrap_trial(net, BoundarySpec::dirichlet_unit_box()), OperatorSpec::neg_laplacian(), s);
  EXPECT_THROW(obj.set_target(Eigen::ArrayXd::Ones(9)), DimensionError);
}

TEST(FixedPoint, IpmnnEpochLossVanishesAtTheEigenfunction) {
  Mlp net = init_mlp({1, 20, 20, 20, 20, 1}, 1);
  const BoundarySpec bc = BoundarySpec::dirichlet_unit_box();
  const OperatorSpec op = OperatorSpec::neg_laplacian();
  const SampleSet s = lhs_sample(2000, 1, Box::cube(1, 0, 1), sampling_seed(1));
  pmnn::testing::seed_to_eigenfunction(net, bc, op, s, exact_product_of_sines(kPi * kPi));

  IpmnnObjective obj(wrap_trial(net, bc), op, s);
  // One inverse-power step from U_prev = U must return U itself.
  obj.set_target(obj.normalized_values(net.params));
  EXPECT_LE(obj.loss(net.params), 1e-6);
}

TEST(FixedPoint, PmnnEpochLossVanishesAtTheEigenfunction) {
  Mlp net = init_mlp({1, 20, 20, 20, 20, 1}, 1);
  const BoundarySpec bc = BoundarySpec::dirichlet_unit_box();
  const OperatorSpec op = OperatorSpec::laplacian_plus_constant(100.0);
  const SampleSet s = lhs_sample(2000, 1, Box::cube(1, 0, 1), sampling_seed(1));
  pmnn::testing::seed_to_eigenfunction(net, bc, op, s, exact_product_of_sines(100.0 - kPi * kPi));

  // The loss compares U with LU/||LU||, so U is normalized the same way.
  PmnnObjective obj(wrap_trial(net, bc), op, s);
  obj.loss(net.params);
  const double scale = 1.0 / discrete_norm(obj.u());
  Mlp scaled = net;
  const int last = scaled.layer_count() - 1;
  scaled.weight(last) *= scale;
  scaled.bias(last) *= scale;
  EXPECT_LE(obj.loss(scaled.params), 1e-6);
}

TEST(FixedPoint, RandomNetworkIsNotAFixedPoint) {
  const Mlp net = init_mlp({1, 20, 20, 1}, 1);
  const BoundarySpec bc = BoundarySpec::dirichlet_unit_box();
  const SampleSet s = lhs_sample(500, 1, Box::cube(1, 0, 1), 1);
  IpmnnObjective obj(wrap_trial(net, bc), OperatorSpec::neg_laplacian(), s);
  obj.set_target(obj.normalized_values(net.params));
  EXPECT_GT(obj.loss(net.params), 1e-4);
}

TEST(Solver, ZeroNetworkIsDegenerate) {
  TrainConfig cfg;
  cfg.layers = {1, 4, 1};
  cfg.samples = 50;
  cfg.epochs = 3;
  const Problem p{OperatorSpec::neg_laplacian(), BoundarySpec::dirichlet_unit_box(), Box::cube(1, 0, 1)};
  // A zero learning rate is rejected up front; a zero network is caught at epoch 1.
  cfg.learning_rate = 0.0;
  EXPECT_THROW(run_solver(cfg, p), ConfigError);

  cfg.learning_rate = 1e-3;
  Mlp net = init_mlp(cfg.layers, 1);
  net.params.setZero();
  IpmnnObjective obj(wrap_trial(net, p.bc), p.op, lhs_sample(50, 1, p.box, 1));
  obj.set_target(Eigen::ArrayXd::Ones(50));
  EXPECT_THROW(obj.loss(net.params), DegenerateError);
}

TEST(Solver, ShortRunIsDeterministicAndRecordsEpochs) {
  TrainConfig cfg;
  cfg.layers = {1, 8, 8, 1};
  cfg.samples = 200;
  cfg.epochs = 250;
  cfg.record_every = 100;
  cfg.seed = 4;
  const Problem p{OperatorSpec::neg_laplacian(), BoundarySpec::dirichlet_unit_box(), Box::cube(1, 0, 1)};
  const auto exact = exact_product_of_sines(kPi * kPi);
  const SolverRun a = run_solver(cfg, p, exact);
  const SolverRun b = run_solver(cfg, p, exact);
  ASSERT_EQ(a.records.size(), 4u);  // 1, 100, 200, 250
  EXPECT_EQ(a.records[0].epoch, 1);
  EXPECT_EQ(a.records.back().epoch, 250);
  for (std::size_t i = 0; i < a.records.size(); ++i) {
    EXPECT_EQ(a.records[i].loss, b.records[i].loss);
    EXPECT_EQ(a.records[i].lambda, b.records[i].lambda);
  }
  EXPECT_EQ(a.network.params, b.network.params);
  EXPECT_EQ(a.estimate.epochs_run, 250);
  EXPECT_NEAR(discrete_norm(a.estimate.eigenfunction), 1.0, 1e-12);
}

TEST(Solver, EpsilonStopsEarly) {
  TrainConfig cfg;
  cfg.layers = {1, 8, 1};
  cfg.samples = 100;
  cfg.epochs = 1000;
  cfg.epsilon = 1e10;
  const Problem p{OperatorSpec::neg_laplacian(), BoundarySpec::dirichlet_unit_box(), Box::cube(1, 0, 1)};
  EXPECT_EQ(run_solver(cfg, p).estimate.epochs_run, 1);
}

TEST(Solver, InteriorShiftIsAddedBack) {
  TrainConfig cfg;
  cfg.layers = {1, 8, 1};
  cfg.samples = 100;
  cfg.epochs = 1;
  const Box box = Box::cube(1, 0, 1);
  const SolverRun r =
      solve_interior(cfg, OperatorSpec::neg_laplacian(), 36.0, BoundarySpec::dirichlet_unit_box(), box);
  const Problem unshifted{OperatorSpec::neg_laplacian(), BoundarySpec::dirichlet_unit_box(), box};
  const double q = rayleigh_quotient(unshifted.op, wrap_trial(r.network, unshifted.bc), r.samples, r.network.params);
  EXPECT_NEAR(r.estimate.lambda, q, 1e-10 * std::abs(q));
}

TEST(Alignment, SignAndNormalization) {
  Eigen::ArrayXd e(4), p(4);
  e << 1, 2, 3, 4;
  p = -3.0 * e;
  EXPECT_NEAR(max_error_aligned(p, e), 0.0, 1e-15);
  EXPECT_LT((sign_aligned(p, e) + p).abs().maxCoeff(), 1e-15);
}
