// Smallest eigenvalue of -u'' on [0,1] with u(0) = u(1) = 0, two ways:
// inverse iteration on a finite-difference matrix, and IPMNN for a short
// training budget. The exact answer is pi^2.

#include <cstdio>
#include <numbers>

#include "pmnn/baseline_fdm.hpp"
#include "pmnn/training.hpp"

int main() {
  const double exact = std::numbers::pi * std::numbers::pi;

  const auto a = pmnn::fdm::assemble_neg_laplacian(1, 99);
  const auto fd = pmnn::fdm::inverse_power_method(a, Eigen::VectorXd::Ones(99), 1000, 1e-12);
  std::printf("finite differences (n_h = 99): %.10f  after %d iterations\n", fd.lambda, fd.iterations);

  pmnn::TrainConfig cfg;
  cfg.method = pmnn::Method::Ipmnn;
  cfg.layers = {1, 20, 20, 20, 20, 1};
  cfg.samples = 1000;
  cfg.epochs = 2000;
  cfg.record_every = 500;
  const pmnn::Problem problem{pmnn::OperatorSpec::neg_laplacian(), pmnn::BoundarySpec::dirichlet_unit_box(),
                              pmnn::Box::cube(1, 0.0, 1.0)};
  const auto run = pmnn::run_solver(cfg, problem, pmnn::exact_product_of_sines(exact), std::nullopt,
                                    [](const pmnn::IterationRecord& r) {
                                      std::printf("  epoch %5ld  loss %.3e  lambda %.6f\n", r.epoch, r.loss, r.lambda);
                                    });
  std::printf("IPMNN (%d epochs): %.6f, relative error %.2e\n", cfg.epochs, run.estimate.lambda,
              std::abs(run.estimate.lambda - exact) / exact);
  std::printf("exact: %.10f\n", exact);
}
