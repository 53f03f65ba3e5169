#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <functional>
#include <random>

#include "pmnn/training.hpp"

namespace pmnn::testing {

/// Central differences of a scalar function of a vector.
inline Eigen::VectorXd fd_gradient(const std::function<double(const Eigen::VectorXd&)>& f, Eigen::VectorXd x,
                                   double h = 1e-6) {
  Eigen::VectorXd g(x.size());
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    const double xi = x[i];
    x[i] = xi + h;
    const double fp = f(x);
    x[i] = xi - h;
    const double fm = f(x);
    x[i] = xi;
    g[i] = (fp - fm) / (2.0 * h);
  }
  return g;
}

/// Five-point second differences summed over coordinates.
inline double fd_laplacian(const std::function<double(const Eigen::VectorXd&)>& f, Eigen::VectorXd x,
                           double h = 1e-3) {
  double lap = 0.0;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    const double xi = x[i];
    auto at = [&](double s) {
      x[i] = xi + s * h;
      return f(x);
    };
    lap += (-at(2) + 16 * at(1) - 30 * at(0) + 16 * at(-1) - at(-2)) / (12 * h * h);
    x[i] = xi;
  }
  return lap;
}

inline double rel_norm_error(const Eigen::VectorXd& got, const Eigen::VectorXd& want) {
  return (got - want).norm() / std::max(want.norm(), 1e-300);
}

/// Random orthogonal matrix from the QR factorization of a Gaussian matrix.
inline Eigen::MatrixXd random_orthogonal(int n, std::mt19937_64& rng) {
  std::normal_distribution<double> g;
  Eigen::MatrixXd a(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) a(i, j) = g(rng);
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(a);
  return qr.householderQ() * Eigen::MatrixXd::Identity(n, n);
}

inline Eigen::MatrixXd symmetric_with_spectrum(const Eigen::VectorXd& eigs, std::mt19937_64& rng) {
  const Eigen::MatrixXd q = random_orthogonal(static_cast<int>(eigs.size()), rng);
  Eigen::MatrixXd a = q * eigs.asDiagonal() * q.transpose();
  return 0.5 * (a + a.transpose());
}

/// Moves the network close to an exact eigenpair: a short Adam regression of
/// U onto u* and of (L - shift) U onto (lambda - shift) u*, then an exact
/// least-squares solve for the output layer, which enters U and LU linearly.
inline void seed_to_eigenfunction(Mlp& net, const BoundarySpec& bc, const OperatorSpec& op, const SampleSet& s,
                                  const ExactSolution& exact, int pretrain_steps = 300) {
  const TrialFunction trial = wrap_trial(net, bc);
  OperatorGraph og = build_operator_graph(op, trial);
  const Eigen::ArrayXd ue = normalize(exact.eigenfunction(s.points));
  const double lam = exact.lambda - op.shift;
  const ad::Array target = ue.transpose();
  ad::Var data = og.graph->data(0);
  ad::Var loss = ad::mean(ad::square(og.u - data)) + ad::mean(ad::square(og.lu / lam - data));
  {
    ad::Evaluator ev(*og.graph, {loss});
    AdamState adam = AdamState::for_size(net.param_count());
    for (int it = 0; it < pretrain_steps; ++it) {
      ev.forward(s.points, std::span<const ad::Array>(&target, 1), net.params);
      adam_step(adam, net.params, ev.gradient(loss, net.param_count()), 1e-3);
    }
  }
  const int last = net.layer_count() - 1;
  const int width = net.layer_sizes[last];
  const int w0 = net.weight_offset(last);
  const int b0 = net.bias_offset(last);
  const Eigen::Index n = s.size();
  ad::Evaluator ev(*og.graph, {og.u, og.lu});
  Eigen::MatrixXd a(2 * n, width + 1);
  for (int k = 0; k <= width; ++k) {
    Eigen::VectorXd p = net.params;
    p.segment(w0, width).setZero();
    p[b0] = 0.0;
    p[k < width ? w0 + k : b0] = 1.0;
    ev.forward(s.points, p);
    a.col(k).head(n) = ev.value(og.u).row(0).transpose().matrix();
    a.col(k).tail(n) = ev.value(og.lu).row(0).transpose().matrix() / lam;
  }
  Eigen::VectorXd rhs(2 * n);
  rhs << ue.matrix(), ue.matrix();
  const Eigen::VectorXd c = a.colPivHouseholderQr().solve(rhs);
  net.params.segment(w0, width) = c.head(width);
  net.params[b0] = c[width];
}

}  // namespace pmnn::testing
