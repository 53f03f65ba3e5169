#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <functional>
#include <numbers>
#include <span>
#include <string>
#include <vector>

#include "pmnn/autodiff/evaluator.hpp"
#include "pmnn/autodiff/graph.hpp"
#include "pmnn/autodiff/jet.hpp"
#include "pmnn/error.hpp"
#include "pmnn/network.hpp"
#include "pmnn/sampling.hpp"

namespace pmnn {

/// V(x) = sin(sum_i c_i cos(x_i)), with every c_i in [0.1, 1].
struct PotentialSpec {
  std::vector<double> coefficients;

  /// c_i = 0.1 + 0.9 (i-1)/max(1, d-1) for i = 1..d.
  static PotentialSpec with_defaults(int d) {
    PotentialSpec p;
    for (int i = 0; i < d; ++i) p.coefficients.push_back(0.1 + 0.9 * i / std::max(1, d - 1));
    return p;
  }

  int dimension() const { return static_cast<int>(coefficients.size()); }

  void validate() const {
    for (double c : coefficients)
      if (!(c >= 0.1 && c <= 1.0)) throw InvalidArgument("potential coefficients must lie in [0.1, 1]");
  }

  ad::Var build(std::span<const ad::Var> coords) const {
    if (static_cast<int>(coords.size()) != dimension()) throw DimensionError("potential dimension mismatch");
    ad::Var acc = coefficients[0] * ad::cos(coords[0]);
    for (int i = 1; i < dimension(); ++i) acc = acc + coefficients[i] * ad::cos(coords[i]);
    return ad::sin(acc);
  }

  double value(const Eigen::Ref<const Eigen::VectorXd>& x) const {
    double s = 0.0;
    for (int i = 0; i < dimension(); ++i) s += coefficients[i] * std::cos(x[i]);
    return std::sin(s);
  }
};

/// The operator L, optionally shifted: the applied operator is L - shift*I.
struct OperatorSpec {
  enum class Kind { NegLaplacian, LaplacianPlusConstant, FokkerPlanck };

  Kind kind = Kind::NegLaplacian;
  double constant = 100.0;  // c in (Delta + c I)
  PotentialSpec potential;  // Fokker-Planck only
  double shift = 0.0;

  static OperatorSpec neg_laplacian() { return {}; }

  static OperatorSpec laplacian_plus_constant(double c = 100.0) {
    OperatorSpec op;
    op.kind = Kind::LaplacianPlusConstant;
    op.constant = c;
    return op;
  }

  static OperatorSpec fokker_planck(PotentialSpec v) {
    v.validate();
    OperatorSpec op;
    op.kind = Kind::FokkerPlanck;
    op.potential = std::move(v);
    return op;
  }

  /// L - alpha I applied on top of any existing shift.
  OperatorSpec shifted(double alpha) const {
    OperatorSpec op = *this;
    op.shift += alpha;
    return op;
  }
};

inline std::string to_string(OperatorSpec::Kind k) {
  switch (k) {
    case OperatorSpec::Kind::NegLaplacian: return "neg_laplacian";
    case OperatorSpec::Kind::LaplacianPlusConstant: return "laplacian_plus_constant";
    case OperatorSpec::Kind::FokkerPlanck: return "fokker_planck";
  }
  return "?";
}

/// How the trial function is made to satisfy the boundary condition exactly.
struct BoundarySpec {
  enum class Kind { DirichletHomogeneous, DirichletGeneral, Periodic };
  using Field = std::function<ad::Var(std::span<const ad::Var>)>;

  Kind kind = Kind::DirichletHomogeneous;
  Field distance;   // phi, DirichletGeneral
  Field extension;  // G, DirichletGeneral
  std::vector<double> periods;
  int modes = 0;

  /// phi(x) = prod x_i (1 - x_i) on [0,1]^d, G = 0.
  static BoundarySpec dirichlet_unit_box() { return {}; }

  static BoundarySpec dirichlet(Field phi, Field g) {
    BoundarySpec b;
    b.kind = Kind::DirichletGeneral;
    b.distance = std::move(phi);
    b.extension = std::move(g);
    return b;
  }

  static BoundarySpec periodic(std::vector<double> periods, int modes) {
    if (modes < 1) throw InvalidArgument("periodic embedding needs k >= 1");
    for (double p : periods)
      if (!(p > 0.0)) throw InvalidArgument("periods must be positive");
    BoundarySpec b;
    b.kind = Kind::Periodic;
    b.periods = std::move(periods);
    b.modes = modes;
    return b;
  }

  /// Input width the network must have for a d-dimensional problem.
  int network_input_width(int d) const { return kind == Kind::Periodic ? 2 * d * modes : d; }
};

/// The network composed with boundary enforcement; a recipe that builds the
/// trial function U(x) into any graph whose coordinates are supplied.
class TrialFunction {
 public:
  TrialFunction(Mlp net, BoundarySpec bc, int dimension)
      : net_(std::move(net)), bc_(std::move(bc)), dim_(dimension) {}

  int dimension() const { return dim_; }
  const Mlp& network() const { return net_; }
  const BoundarySpec& boundary() const { return bc_; }

  /// Periodic feature map: x_i -> {sin(2 pi j x_i / P_i), cos(2 pi j x_i / P_i)}, j = 1..k.
  std::vector<ad::Var> periodic_features(std::span<const ad::Var> coords) const {
    std::vector<ad::Var> feats;
    for (int i = 0; i < dim_; ++i) {
      for (int j = 1; j <= bc_.modes; ++j) {
        ad::Var arg = (2.0 * std::numbers::pi * j / bc_.periods[i]) * coords[i];
        feats.push_back(ad::sin(arg));
        feats.push_back(ad::cos(arg));
      }
    }
    return feats;
  }

  ad::Var build(std::span<const ad::Var> coords) const {
    if (static_cast<int>(coords.size()) != dim_) throw DimensionError("trial function dimension mismatch");
    switch (bc_.kind) {
      case BoundarySpec::Kind::Periodic: {
        std::vector<ad::Var> feats = periodic_features(coords);
        return forward_expr(net_, feats);
      }
      case BoundarySpec::Kind::DirichletHomogeneous: {
        ad::Var phi = coords[0] * (1.0 - coords[0]);
        for (int i = 1; i < dim_; ++i) phi = phi * (coords[i] * (1.0 - coords[i]));
        return phi * forward_expr(net_, coords);
      }
      case BoundarySpec::Kind::DirichletGeneral:
        return bc_.distance(coords) * forward_expr(net_, coords) + bc_.extension(coords);
    }
    throw InvalidArgument("unknown boundary kind");
  }

 private:
  Mlp net_;
  BoundarySpec bc_;
  int dim_;
};

/// Checks the network width against the boundary treatment and returns the
/// trial function. For Dirichlet problems d is the network input width;
/// for periodic ones it is the number of periods.
inline TrialFunction wrap_trial(const Mlp& net, const BoundarySpec& bc) {
  int d = net.input_width();
  if (bc.kind == BoundarySpec::Kind::Periodic) {
    d = static_cast<int>(bc.periods.size());
    if (d < 1) throw InvalidArgument("periodic boundary needs at least one period");
    const int expected = bc.network_input_width(d);
    if (net.input_width() != expected)
      throw DimensionError("periodic embedding with d=" + std::to_string(d) + ", k=" +
                           std::to_string(bc.modes) + " needs network input width " +
                           std::to_string(expected) + ", got " + std::to_string(net.input_width()));
  } else if ((bc.kind == BoundarySpec::Kind::DirichletGeneral) && (!bc.distance || !bc.extension)) {
    throw InvalidArgument("general Dirichlet boundary needs both phi and G");
  }
  return TrialFunction(net, bc, d);
}

/// (L - shift I) u as a graph node, given the jet builder of u's graph.
inline ad::Var operator_expr(const OperatorSpec& op, ad::JetBuilder& jets, ad::Var u,
                             std::span<const ad::Var> coords) {
  ad::JetVars ju = jets(u);
  ad::Var lap = ad::laplacian_of(ju);
  ad::Var out;
  switch (op.kind) {
    case OperatorSpec::Kind::NegLaplacian:
      out = -lap;
      if (op.shift != 0.0) out = out - op.shift * u;
      break;
    case OperatorSpec::Kind::LaplacianPlusConstant:
      out = lap + (op.constant - op.shift) * u;
      break;
    case OperatorSpec::Kind::FokkerPlanck: {
      if (op.potential.dimension() != jets.dimension())
        throw DimensionError("potential dimension does not match the problem");
      ad::JetVars jv = jets(op.potential.build(coords));
      // -lap u - grad V . grad u - lap V u
      out = -lap;
      ad::Var dot = ad::detail::zdot(jv.grad, ju.grad);
      if (dot.valid()) out = out - dot;
      if (jv.lap.valid()) out = out - jv.lap * u;
      if (op.shift != 0.0) out = out - op.shift * u;
      break;
    }
  }
  return out;
}

/// Convenience graph bundle: coordinates, U and (L - shift I) U.
struct OperatorGraph {
  std::unique_ptr<ad::Graph> graph;
  std::vector<ad::Var> coords;
  ad::Var u;
  ad::Var lu;
};

inline OperatorGraph build_operator_graph(const OperatorSpec& op, const TrialFunction& trial) {
  OperatorGraph og;
  og.graph = std::make_unique<ad::Graph>(trial.dimension());
  og.coords = og.graph->coordinates();
  og.u = trial.build(og.coords);
  ad::JetBuilder jets(*og.graph);
  og.lu = operator_expr(op, jets, og.u, og.coords);
  return og;
}

/// (L - shift I) U at each column of `points`.
inline Eigen::ArrayXd apply_operator(const OperatorSpec& op, const TrialFunction& trial,
                                     const Eigen::ArrayXXd& points, const Eigen::VectorXd& params) {
  OperatorGraph og = build_operator_graph(op, trial);
  ad::Evaluator ev(*og.graph, {og.lu});
  ev.forward(points, params);
  return ev.value(og.lu).row(0).transpose();
}

inline double apply_operator(const OperatorSpec& op, const TrialFunction& trial, const Eigen::VectorXd& point,
                             const Eigen::VectorXd& params) {
  return apply_operator(op, trial, Eigen::ArrayXXd(point.array()), params)(0);
}

/// sum_i (LU)(x_i) U(x_i) / sum_i U(x_i)^2 from precomputed samples.
inline double rayleigh_quotient(const Eigen::ArrayXd& lu, const Eigen::ArrayXd& u) {
  const double den = u.square().sum();
  if (!(den > 0.0)) throw DegenerateError("Rayleigh quotient of a trial that vanishes on the sample set");
  return (lu * u).sum() / den;
}

inline double rayleigh_quotient(const OperatorSpec& op, const TrialFunction& trial, const SampleSet& samples,
                                const Eigen::VectorXd& params) {
  if (samples.size() < 1) throw InvalidArgument("empty sample set");
  OperatorGraph og = build_operator_graph(op, trial);
  ad::Evaluator ev(*og.graph, {og.u, og.lu});
  ev.forward(samples.points, params);
  return rayleigh_quotient(Eigen::ArrayXd(ev.value(og.lu).row(0).transpose()),
                           Eigen::ArrayXd(ev.value(og.u).row(0).transpose()));
}

/// Trial values U(x_j) only.
inline Eigen::ArrayXd evaluate_trial(const TrialFunction& trial, const Eigen::ArrayXXd& points,
                                     const Eigen::VectorXd& params) {
  ad::Graph g(trial.dimension());
  std::vector<ad::Var> coords = g.coordinates();
  ad::Var u = trial.build(coords);
  ad::Evaluator ev(g, {u});
  ev.forward(points, params);
  return ev.value(u).row(0).transpose();
}

/// A known eigenpair used for error reporting.
struct ExactSolution {
  std::string name;
  double lambda = 0.0;
  std::function<Eigen::ArrayXd(const Eigen::ArrayXXd&)> eigenfunction;
};

/// prod_i sin(mode pi x_i) on [0,1]^d.
inline Eigen::ArrayXd product_of_sines(const Eigen::ArrayXXd& points, int mode = 1) {
  Eigen::ArrayXd out = Eigen::ArrayXd::Ones(points.cols());
  for (Eigen::Index i = 0; i < points.rows(); ++i)
    out *= (mode * std::numbers::pi * points.row(i).transpose()).sin();
  return out;
}

inline ExactSolution exact_product_of_sines(double lambda, int mode = 1) {
  return {"product_of_sines", lambda, [mode](const Eigen::ArrayXXd& p) { return product_of_sines(p, mode); }};
}

/// exp(-V(x)), the zero-eigenvalue mode of the Fokker-Planck operator.
inline ExactSolution exact_exp_neg_potential(PotentialSpec v) {
  return {"exp_neg_potential", 0.0, [v](const Eigen::ArrayXXd& p) {
            Eigen::ArrayXd out(p.cols());
            for (Eigen::Index j = 0; j < p.cols(); ++j) out(j) = std::exp(-v.value(p.col(j).matrix()));
            return out;
          }};
}

}  // namespace pmnn
