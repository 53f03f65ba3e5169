#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "pmnn/autodiff/evaluator.hpp"
#include "pmnn/autodiff/graph.hpp"
#include "pmnn/autodiff/jet.hpp"
#include "pmnn/error.hpp"
#include "pmnn/network.hpp"
#include "pmnn/problems.hpp"
#include "pmnn/sampling.hpp"

namespace pmnn {

enum class Method { Pmnn, Ipmnn };

inline std::string to_string(Method m) { return m == Method::Pmnn ? "pmnn" : "ipmnn"; }

struct TrainConfig {
  Method method = Method::Ipmnn;
  std::vector<int> layers;
  int samples = 2000;
  int epochs = 20000;
  std::optional<double> epsilon;  // disabled: always run `epochs`
  double learning_rate = 1e-3;
  std::uint64_t seed = 1;
  int record_every = 100;
  // IPMNN only: treat ||L U_k|| as a constant during differentiation.
  bool detach_norm = false;

  void validate() const {
    std::vector<std::string> v;
    if (samples < 1) v.push_back("training.samples must be >= 1");
    if (epochs < 1) v.push_back("training.epochs must be >= 1");
    if (!(learning_rate > 0.0)) v.push_back("training.learning_rate must be > 0");
    if (record_every < 1) v.push_back("outputs.record_every must be >= 1");
    if (epsilon && !(*epsilon > 0.0)) v.push_back("training.epsilon must be > 0 when set");
    if (!v.empty()) throw ConfigError(std::move(v));
  }
};

struct Problem {
  OperatorSpec op;
  BoundarySpec bc;
  Box box;

  int dimension() const { return box.dimension(); }
};

// --- Adam -------------------------------------------------------------------

struct AdamState {
  Eigen::VectorXd m;
  Eigen::VectorXd v;
  long t = 0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;

  static AdamState for_size(Eigen::Index n) {
    AdamState s;
    s.m = Eigen::VectorXd::Zero(n);
    s.v = Eigen::VectorXd::Zero(n);
    return s;
  }
};

/// One bias-corrected Adam update of `params` in place.
inline void adam_step(AdamState& s, Eigen::VectorXd& params, const Eigen::VectorXd& grads, double lr) {
  if (params.size() != grads.size() || s.m.size() != params.size() || s.v.size() != params.size())
    throw DimensionError("adam: parameter, gradient and moment lengths differ");
  s.t += 1;
  s.m = s.beta1 * s.m + (1.0 - s.beta1) * grads;
  s.v = s.beta2 * s.v + (1.0 - s.beta2) * grads.cwiseAbs2();
  const double c1 = 1.0 - std::pow(s.beta1, static_cast<double>(s.t));
  const double c2 = 1.0 - std::pow(s.beta2, static_cast<double>(s.t));
  params.array() -= lr * (s.m.array() / c1) / ((s.v.array() / c2).sqrt() + s.eps);
}

// --- records ----------------------------------------------------------------

struct IterationRecord {
  long epoch = 0;
  double loss = 0.0;
  double lambda = 0.0;
  std::optional<double> lambda_err_max;
  std::optional<double> u_err_max;
};

struct EigenEstimate {
  double lambda = 0.0;
  Eigen::ArrayXd eigenfunction;  // on the sample set, discrete norm 1
  double final_loss = 0.0;
  long epochs_run = 0;
};

/// Flips `pred` if its inner product with `reference` is negative.
inline Eigen::ArrayXd sign_aligned(const Eigen::ArrayXd& pred, const Eigen::ArrayXd& reference) {
  return (pred * reference).sum() < 0.0 ? Eigen::ArrayXd(-pred) : pred;
}

/// max |u - u*| after normalizing both to discrete norm 1 and aligning signs.
inline double max_error_aligned(const Eigen::ArrayXd& pred, const Eigen::ArrayXd& exact) {
  Eigen::ArrayXd e = normalize(exact);
  Eigen::ArrayXd p = sign_aligned(normalize(pred), e);
  return (p - e).abs().maxCoeff();
}

// --- objectives -------------------------------------------------------------

inline constexpr double kDegenerateNorm = 1e-30;

/// Power-method loss: mean (U - detach(LU/||LU||))^2.
///
/// The graph is built once for the fixed sample set and re-evaluated for
/// every parameter vector.
class PmnnObjective {
 public:
  PmnnObjective(const TrialFunction& trial, const OperatorSpec& op, const SampleSet& samples)
      : graph_(std::make_unique<ad::Graph>(trial.dimension())), points_(samples.points) {
    if (samples.dimension() != trial.dimension()) throw DimensionError("sample dimension mismatch");
    std::vector<ad::Var> coords = graph_->coordinates();
    u_ = trial.build(coords);
    ad::JetBuilder jets(*graph_);
    lu_ = operator_expr(op, jets, u_, coords);
    norm_ = ad::rms(lu_);
    ad::Var target = ad::detach(lu_ / norm_);
    loss_ = ad::mean(ad::square(u_ - target));
    eval_ = std::make_unique<ad::Evaluator>(*graph_, std::initializer_list<ad::Var>{loss_, u_, lu_, norm_});
  }

  double loss(const Eigen::VectorXd& params) {
    forward(params);
    return eval_->scalar(loss_);
  }

  /// Gradient at the parameters of the last loss() call.
  Eigen::VectorXd gradient(Eigen::Index param_count) { return eval_->gradient(loss_, param_count); }

  Eigen::VectorXd gradient_at(const Eigen::VectorXd& params) {
    forward(params);
    return gradient(params.size());
  }

  /// Values of U and (L - shift I) U from the last evaluation.
  Eigen::ArrayXd u() const { return eval_->value(u_).row(0).transpose(); }
  Eigen::ArrayXd lu() const { return eval_->value(lu_).row(0).transpose(); }

 private:
  void forward(const Eigen::VectorXd& params) {
    eval_->forward(points_, params);
    if (!(eval_->scalar(norm_) >= kDegenerateNorm))
      throw DegenerateError("||L U|| fell below 1e-30: the operator annihilated the trial function");
  }

  std::unique_ptr<ad::Graph> graph_;
  Eigen::ArrayXXd points_;
  ad::Var u_, lu_, norm_, loss_;
  std::unique_ptr<ad::Evaluator> eval_;
};

/// Inverse-power loss: mean (LU/||LU|| - U_prev)^2 with U_prev a data feed.
class IpmnnObjective {
 public:
  IpmnnObjective(const TrialFunction& trial, const OperatorSpec& op, const SampleSet& samples,
                 bool detach_norm = false)
      : graph_(std::make_unique<ad::Graph>(trial.dimension())), points_(samples.points) {
    if (samples.dimension() != trial.dimension()) throw DimensionError("sample dimension mismatch");
    std::vector<ad::Var> coords = graph_->coordinates();
    u_ = trial.build(coords);
    ad::JetBuilder jets(*graph_);
    lu_ = operator_expr(op, jets, u_, coords);
    norm_ = ad::rms(lu_);
    ad::Var norm = detach_norm ? ad::detach(norm_) : norm_;
    ad::Var target = graph_->data(0);
    loss_ = ad::mean(ad::square(lu_ / norm - target));
    eval_ = std::make_unique<ad::Evaluator>(*graph_, std::initializer_list<ad::Var>{loss_, u_, lu_, norm_});
    values_ = std::make_unique<ad::Evaluator>(*graph_, std::initializer_list<ad::Var>{u_});
    target_.resize(1, samples.size());
  }

  void set_target(const Eigen::ArrayXd& target) {
    if (target.size() != points_.cols()) throw DimensionError("target length differs from the sample count");
    target_ = target.transpose();
  }

  Eigen::ArrayXd target() const { return target_.row(0).transpose(); }

  double loss(const Eigen::VectorXd& params) {
    eval_->forward(points_, std::span<const ad::Array>(&target_, 1), params);
    if (!(eval_->scalar(norm_) >= kDegenerateNorm))
      throw DegenerateError("||L U|| fell below 1e-30: the operator annihilated the trial function");
    return eval_->scalar(loss_);
  }

  Eigen::VectorXd gradient(Eigen::Index param_count) { return eval_->gradient(loss_, param_count); }

  Eigen::VectorXd gradient_at(const Eigen::VectorXd& params) {
    loss(params);
    return gradient(params.size());
  }

  Eigen::ArrayXd u() const { return eval_->value(u_).row(0).transpose(); }
  Eigen::ArrayXd lu() const { return eval_->value(lu_).row(0).transpose(); }

  /// U(params) / ||U(params)||, evaluated without the operator.
  Eigen::ArrayXd normalized_values(const Eigen::VectorXd& params) {
    values_->forward(points_, params);
    Eigen::ArrayXd u = values_->value(u_).row(0).transpose();
    const double n = discrete_norm(u);
    if (!(n >= kDegenerateNorm)) throw DegenerateError("||U|| fell below 1e-30");
    return u / n;
  }

 private:
  std::unique_ptr<ad::Graph> graph_;
  Eigen::ArrayXXd points_;
  ad::Array target_;
  ad::Var u_, lu_, norm_, loss_;
  std::unique_ptr<ad::Evaluator> eval_;
  std::unique_ptr<ad::Evaluator> values_;
};

/// One PMNN epoch: loss at the current parameters, then one Adam update.
inline double pmnn_epoch(PmnnObjective& obj, Mlp& net, AdamState& adam, double lr) {
  const double l = obj.loss(net.params);
  adam_step(adam, net.params, obj.gradient(net.params.size()), lr);
  return l;
}

inline double pmnn_epoch(Mlp& net, const OperatorSpec& op, const BoundarySpec& bc, const SampleSet& samples,
                         AdamState& adam, double lr = 1e-3) {
  PmnnObjective obj(wrap_trial(net, bc), op, samples);
  return pmnn_epoch(obj, net, adam, lr);
}

/// One IPMNN epoch against `target` (U_{k-1}); returns the loss and the new
/// target U_k/||U_k|| taken after the update.
inline std::pair<double, Eigen::ArrayXd> ipmnn_epoch(IpmnnObjective& obj, Mlp& net, AdamState& adam,
                                                     const Eigen::ArrayXd& target, double lr) {
  obj.set_target(target);
  const double l = obj.loss(net.params);
  adam_step(adam, net.params, obj.gradient(net.params.size()), lr);
  return {l, obj.normalized_values(net.params)};
}

inline std::pair<double, Eigen::ArrayXd> ipmnn_epoch(Mlp& net, const OperatorSpec& op, const BoundarySpec& bc,
                                                     const SampleSet& samples, AdamState& adam,
                                                     const Eigen::ArrayXd& target, double lr = 1e-3,
                                                     bool detach_norm = false) {
  IpmnnObjective obj(wrap_trial(net, bc), op, samples, detach_norm);
  return ipmnn_epoch(obj, net, adam, target, lr);
}

// --- drivers ----------------------------------------------------------------

struct SolverRun {
  EigenEstimate estimate;
  std::vector<IterationRecord> records;
  Mlp network;
  SampleSet samples;
};

using RecordSink = std::function<void(const IterationRecord&)>;

/// Seeds of the two random streams of a run.
inline std::uint64_t sampling_seed(std::uint64_t seed) { return seed * 2654435761ULL + 17; }
inline std::uint64_t init_seed(std::uint64_t seed) { return seed; }

/// Trains PMNN or IPMNN on a fixed sample set (Latin hypercube unless
/// `samples` is given). Lambda is reported for the unshifted operator,
/// i.e. the Rayleigh quotient of (L - shift I) plus the shift.
inline SolverRun run_solver(const TrainConfig& cfg, const Problem& problem,
                            const std::optional<ExactSolution>& exact = std::nullopt,
                            std::optional<SampleSet> samples = std::nullopt, const RecordSink& sink = {}) {
  cfg.validate();
  problem.box.validate();
  const int d = problem.dimension();

  SolverRun run;
  run.samples = samples ? std::move(*samples) : lhs_sample(cfg.samples, d, problem.box, sampling_seed(cfg.seed));
  if (run.samples.dimension() != d) throw DimensionError("sample set dimension differs from the problem");
  run.network = init_mlp(cfg.layers, init_seed(cfg.seed));
  Mlp& net = run.network;
  TrialFunction trial = wrap_trial(net, problem.bc);
  if (trial.dimension() != d) throw DimensionError("boundary treatment and box disagree on the dimension");

  std::optional<Eigen::ArrayXd> exact_u;
  if (exact) exact_u = exact->eigenfunction(run.samples.points);

  AdamState adam = AdamState::for_size(net.param_count());
  const double shift = problem.op.shift;

  auto make_record = [&](long epoch, double loss, const Eigen::ArrayXd& u, const Eigen::ArrayXd& lu) {
    IterationRecord r;
    r.epoch = epoch;
    r.loss = loss;
    r.lambda = rayleigh_quotient(lu, u) + shift;
    if (exact) {
      r.lambda_err_max = std::abs(r.lambda - exact->lambda);
      r.u_err_max = max_error_aligned(u, *exact_u);
    }
    return r;
  };
  auto emit = [&](IterationRecord r) {
    if (sink) sink(r);
    run.records.push_back(std::move(r));
  };

  std::optional<PmnnObjective> pm;
  std::optional<IpmnnObjective> ipm;
  Eigen::ArrayXd target;
  if (cfg.method == Method::Pmnn) {
    pm.emplace(trial, problem.op, run.samples);
  } else {
    ipm.emplace(trial, problem.op, run.samples, cfg.detach_norm);
    target = Eigen::ArrayXd::Ones(run.samples.size());  // U_0: normalized constant
  }

  long epoch = 0;
  double last_loss = 0.0;
  try {
    for (epoch = 1; epoch <= cfg.epochs; ++epoch) {
      double loss = 0.0;
      if (pm) {
        loss = pm->loss(net.params);
      } else {
        ipm->set_target(target);
        loss = ipm->loss(net.params);
      }
      const bool stop = cfg.epsilon && loss < *cfg.epsilon;
      const bool record = epoch == 1 || epoch % cfg.record_every == 0 || epoch == cfg.epochs || stop ||
                          !std::isfinite(loss);
      if (record) {
        if (pm)
          emit(make_record(epoch, loss, pm->u(), pm->lu()));
        else
          emit(make_record(epoch, loss, ipm->u(), ipm->lu()));
      }
      if (!std::isfinite(loss)) throw DivergenceError("loss became non-finite", epoch);
      last_loss = loss;
      if (pm) {
        adam_step(adam, net.params, pm->gradient(net.params.size()), cfg.learning_rate);
      } else {
        adam_step(adam, net.params, ipm->gradient(net.params.size()), cfg.learning_rate);
        target = ipm->normalized_values(net.params);
      }
      if (stop) break;
    }
  } catch (const DegenerateError& e) {
    if (e.epoch() >= 0) throw;
    throw DegenerateError(e.what(), epoch);
  }

  TrialFunction trained = wrap_trial(net, problem.bc);
  OperatorGraph og = build_operator_graph(problem.op, trained);
  ad::Evaluator ev(*og.graph, {og.u, og.lu});
  ev.forward(run.samples.points, net.params);
  Eigen::ArrayXd u = ev.value(og.u).row(0).transpose();
  Eigen::ArrayXd lu = ev.value(og.lu).row(0).transpose();

  run.estimate.lambda = rayleigh_quotient(lu, u) + shift;
  run.estimate.eigenfunction = normalize(u);
  if (exact_u) run.estimate.eigenfunction = sign_aligned(run.estimate.eigenfunction, *exact_u);
  run.estimate.final_loss = last_loss;
  run.estimate.epochs_run = std::min<long>(epoch, cfg.epochs);
  return run;
}

/// Eigenvalue of L nearest `alpha`: IPMNN on L - alpha I, shift added back.
inline SolverRun solve_interior(TrainConfig cfg, const OperatorSpec& base_op, double alpha, const BoundarySpec& bc,
                                const Box& box, const std::optional<ExactSolution>& exact = std::nullopt,
                                const RecordSink& sink = {}) {
  if (!std::isfinite(alpha)) throw InvalidArgument("shift must be finite");
  cfg.method = Method::Ipmnn;
  Problem p{base_op.shifted(alpha), bc, box};
  return run_solver(cfg, p, exact, std::nullopt, sink);
}

}  // namespace pmnn
