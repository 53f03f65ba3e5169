#pragma once

#include <nlohmann/json.hpp>

#include <cmath>
#include <cstdint>
#include <fstream>
#include <map>
#include <numbers>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "pmnn/error.hpp"
#include "pmnn/problems.hpp"
#include "pmnn/training.hpp"

namespace pmnn::harness {

using nlohmann::json;

// Key schema of an experiment file. Every key is optional except where
// validate() says otherwise; defaults are the member initializers.
//
// {
//   "name": str, "description": str,
//   "kind": "solver" | "fdm_sweep",
//   "problem": {"operator": "neg_laplacian" | "laplacian_plus_constant" | "fokker_planck",
//               "dimension": int, "boundary": "dirichlet" | "periodic",
//               "shift": real, "constant": real, "potential": [real, ...]},
//   "architecture": {"layers": [int, ...], "modes": int},
//   "training": {"method": "pmnn" | "ipmnn", "samples": int, "epochs": int,
//                "learning_rate": real, "seed": int, "sampling": "lhs" | "grid",
//                "grid_points": int, "detach_norm": bool},
//   "exact": {"name": "none" | "product_of_sines" | "exp_neg_potential", "mode": int},
//   "outputs": {"directory": str, "record_every": int, "histogram_bins": int,
//               "density_points": int, "eval_points": int},
//   "sweep": {"grids": [int, ...], "with_network": bool},
//   "profiles": {"<profile>": {"samples": int, "epochs": int}, ...}
// }

struct ProblemConfig {
  std::string op = "neg_laplacian";
  int dimension = 1;
  std::string boundary = "dirichlet";
  double shift = 0.0;
  double constant = 100.0;
  std::vector<double> potential;  // empty: default coefficients
  bool operator==(const ProblemConfig&) const = default;
};

struct ArchitectureConfig {
  std::vector<int> layers;
  int modes = 0;  // periodic embedding order k
  bool operator==(const ArchitectureConfig&) const = default;
};

struct TrainingConfig {
  std::string method = "ipmnn";
  int samples = 2000;
  int epochs = 20000;
  double learning_rate = 1e-3;
  std::uint64_t seed = 1;
  std::string sampling = "lhs";
  int grid_points = 0;  // points per axis when sampling == "grid"
  bool detach_norm = false;
  bool operator==(const TrainingConfig&) const = default;
};

struct ExactConfig {
  std::string name = "none";
  int mode = 1;
  bool operator==(const ExactConfig&) const = default;
};

struct OutputConfig {
  std::string directory = "runs";
  int record_every = 100;
  int histogram_bins = 50;
  int density_points = 100000;
  int eval_points = 0;  // 0: chosen from the dimension
  bool operator==(const OutputConfig&) const = default;
};

struct SweepConfig {
  std::vector<int> grids = {8, 16, 32, 64};
  bool with_network = true;
  bool operator==(const SweepConfig&) const = default;
};

struct ProfileOverride {
  int samples = 0;
  int epochs = 0;
  bool operator==(const ProfileOverride&) const = default;
};

struct ExperimentConfig {
  std::string name = "experiment";
  std::string description;
  std::string kind = "solver";
  ProblemConfig problem;
  ArchitectureConfig architecture;
  TrainingConfig training;
  ExactConfig exact;
  OutputConfig outputs;
  SweepConfig sweep;
  std::map<std::string, ProfileOverride> profiles;
  bool operator==(const ExperimentConfig&) const = default;

  bool periodic() const { return problem.boundary == "periodic"; }
  int expected_input_width() const {
    return periodic() ? 2 * problem.dimension * architecture.modes : problem.dimension;
  }
};

// ---------------------------------------------------------------- json i/o

inline json to_json(const ExperimentConfig& c) {
  json j;
  j["name"] = c.name;
  j["description"] = c.description;
  j["kind"] = c.kind;
  j["problem"] = {{"operator", c.problem.op},       {"dimension", c.problem.dimension},
                  {"boundary", c.problem.boundary}, {"shift", c.problem.shift},
                  {"constant", c.problem.constant}, {"potential", c.problem.potential}};
  j["architecture"] = {{"layers", c.architecture.layers}, {"modes", c.architecture.modes}};
  j["training"] = {{"method", c.training.method},
                   {"samples", c.training.samples},
                   {"epochs", c.training.epochs},
                   {"learning_rate", c.training.learning_rate},
                   {"seed", c.training.seed},
                   {"sampling", c.training.sampling},
                   {"grid_points", c.training.grid_points},
                   {"detach_norm", c.training.detach_norm}};
  j["exact"] = {{"name", c.exact.name}, {"mode", c.exact.mode}};
  j["outputs"] = {{"directory", c.outputs.directory},
                  {"record_every", c.outputs.record_every},
                  {"histogram_bins", c.outputs.histogram_bins},
                  {"density_points", c.outputs.density_points},
                  {"eval_points", c.outputs.eval_points}};
  j["sweep"] = {{"grids", c.sweep.grids}, {"with_network", c.sweep.with_network}};
  json profiles = json::object();
  for (const auto& [name, p] : c.profiles) profiles[name] = {{"samples", p.samples}, {"epochs", p.epochs}};
  j["profiles"] = profiles;
  return j;
}

namespace detail {

// Reads typed fields out of one JSON object, recording every problem instead
// of stopping at the first.
class Reader {
 public:
  Reader(const json& obj, std::string path, std::vector<std::string>& errors)
      : obj_(obj), path_(std::move(path)), errors_(errors) {
    if (!obj_.is_object()) errors_.push_back(path_ + " must be an object");
  }

  template <class T>
  void read(const char* key, T& out) {
    seen_.push_back(key);
    if (!obj_.is_object() || !obj_.contains(key)) return;
    const json& v = obj_.at(key);
    try {
      check_kind<T>(v);
      out = v.get<T>();
    } catch (const std::exception&) {
      errors_.push_back(path_ + "." + key + " has the wrong type (" + std::string(v.type_name()) + ")");
    }
  }

  /// Nested object, or an empty object when absent.
  const json& child(const char* key) {
    seen_.push_back(key);
    static const json empty = json::object();
    if (!obj_.is_object() || !obj_.contains(key)) return empty;
    return obj_.at(key);
  }

  void reject_unknown() {
    if (!obj_.is_object()) return;
    for (auto it = obj_.begin(); it != obj_.end(); ++it)
      if (std::find(seen_.begin(), seen_.end(), it.key()) == seen_.end())
        errors_.push_back(path_ + "." + it.key() + " is not a recognized key");
  }

 private:
  template <class T>
  static void check_kind(const json& v) {
    // nlohmann converts across number kinds silently; keep integers integral.
    if constexpr (std::is_same_v<T, bool>) {
      if (!v.is_boolean()) throw std::invalid_argument("bool");
    } else if constexpr (std::is_integral_v<T>) {
      if (!v.is_number_integer()) throw std::invalid_argument("int");
      if constexpr (std::is_unsigned_v<T>)
        if (v.is_number_integer() && !v.is_number_unsigned() && v.get<long long>() < 0)
          throw std::invalid_argument("unsigned");
    } else if constexpr (std::is_floating_point_v<T>) {
      if (!v.is_number()) throw std::invalid_argument("real");
    } else if constexpr (std::is_same_v<T, std::string>) {
      if (!v.is_string()) throw std::invalid_argument("string");
    } else if constexpr (std::is_same_v<T, std::vector<int>>) {
      if (!v.is_array()) throw std::invalid_argument("array");
      for (const json& e : v)
        if (!e.is_number_integer()) throw std::invalid_argument("int");
    } else if constexpr (std::is_same_v<T, std::vector<double>>) {
      if (!v.is_array()) throw std::invalid_argument("array");
      for (const json& e : v)
        if (!e.is_number()) throw std::invalid_argument("real");
    }
  }

  const json& obj_;
  std::string path_;
  std::vector<std::string>& errors_;
  std::vector<std::string> seen_;
};

inline bool one_of(const std::string& v, std::initializer_list<const char*> allowed) {
  for (const char* a : allowed)
    if (v == a) return true;
  return false;
}

}  // namespace detail

/// Semantic checks. Returns every violation found (empty when valid).
inline std::vector<std::string> violations(const ExperimentConfig& c) {
  std::vector<std::string> v;
  const ProblemConfig& p = c.problem;
  const int d = p.dimension;
  if (c.name.empty()) v.push_back("name must not be empty");
  if (!detail::one_of(c.kind, {"solver", "fdm_sweep"})) v.push_back("kind '" + c.kind + "' is unknown");

  const bool op_ok = detail::one_of(p.op, {"neg_laplacian", "laplacian_plus_constant", "fokker_planck"});
  if (!op_ok) v.push_back("problem.operator '" + p.op + "' is unknown");
  if (d < 1) v.push_back("problem.dimension must be >= 1");
  const bool bc_ok = detail::one_of(p.boundary, {"dirichlet", "periodic"});
  if (!bc_ok) v.push_back("problem.boundary '" + p.boundary + "' is unknown");
  if (!std::isfinite(p.shift)) v.push_back("problem.shift must be finite");
  if (!std::isfinite(p.constant)) v.push_back("problem.constant must be finite");
  if (p.op == "fokker_planck") {
    if (bc_ok && p.boundary != "periodic") v.push_back("problem.operator fokker_planck requires a periodic boundary");
    if (!p.potential.empty() && static_cast<int>(p.potential.size()) != d)
      v.push_back("problem.potential has " + std::to_string(p.potential.size()) + " coefficients, dimension is " +
                  std::to_string(d));
    for (double x : p.potential)
      if (!(x >= 0.1 && x <= 1.0)) {
        v.push_back("problem.potential coefficients must lie in [0.1, 1]");
        break;
      }
  } else if (op_ok && bc_ok && p.boundary != "dirichlet") {
    v.push_back("problem.operator " + p.op + " requires a dirichlet boundary");
  }

  const ArchitectureConfig& a = c.architecture;
  if (c.periodic() && a.modes < 1) v.push_back("architecture.modes must be >= 1 for a periodic boundary");
  if (a.layers.size() < 2) {
    v.push_back("architecture.layers needs at least an input and an output width");
  } else {
    for (int w : a.layers)
      if (w < 1) {
        v.push_back("architecture.layers entries must be >= 1");
        break;
      }
    if (a.layers.back() != 1) v.push_back("architecture.layers must end in a single output");
    if (d >= 1 && (!c.periodic() || a.modes >= 1) && a.layers.front() != c.expected_input_width()) {
      std::string why = c.periodic() ? "the periodic embedding with d=" + std::to_string(d) +
                                           ", k=" + std::to_string(a.modes) + " needs input width "
                                     : "a dirichlet problem with d=" + std::to_string(d) + " needs input width ";
      v.push_back("architecture.layers[0] is " + std::to_string(a.layers.front()) + " but " + why +
                  std::to_string(c.expected_input_width()));
    }
  }

  const TrainingConfig& t = c.training;
  if (!detail::one_of(t.method, {"pmnn", "ipmnn"})) v.push_back("training.method '" + t.method + "' is unknown");
  if (t.samples < 1) v.push_back("training.samples must be >= 1");
  if (t.epochs < 1) v.push_back("training.epochs must be >= 1");
  if (!(t.learning_rate > 0.0) || !std::isfinite(t.learning_rate)) v.push_back("training.learning_rate must be > 0");
  if (!detail::one_of(t.sampling, {"lhs", "grid"})) v.push_back("training.sampling '" + t.sampling + "' is unknown");
  if (t.sampling == "grid" && t.grid_points < 2) v.push_back("training.grid_points must be >= 2 for grid sampling");

  const ExactConfig& e = c.exact;
  if (!detail::one_of(e.name, {"none", "product_of_sines", "exp_neg_potential"})) {
    v.push_back("exact.name '" + e.name + "' does not name a known solution");
  } else if (e.name == "product_of_sines" && (p.op == "fokker_planck" || p.boundary != "dirichlet")) {
    v.push_back("exact.name product_of_sines applies to dirichlet Laplacian problems only");
  } else if (e.name == "exp_neg_potential" && p.op != "fokker_planck") {
    v.push_back("exact.name exp_neg_potential applies to the fokker_planck operator only");
  }
  if (e.mode < 1) v.push_back("exact.mode must be >= 1");

  const OutputConfig& o = c.outputs;
  if (o.directory.empty()) v.push_back("outputs.directory must not be empty");
  if (o.record_every < 1) v.push_back("outputs.record_every must be >= 1");
  if (o.histogram_bins < 2) v.push_back("outputs.histogram_bins must be >= 2");
  if (o.density_points < 1) v.push_back("outputs.density_points must be >= 1");
  if (o.eval_points < 0) v.push_back("outputs.eval_points must be >= 0");

  if (c.kind == "fdm_sweep") {
    if (p.op != "neg_laplacian" || p.boundary != "dirichlet")
      v.push_back("an fdm_sweep needs the neg_laplacian operator with a dirichlet boundary");
    if (d != 1 && d != 2) v.push_back("an fdm_sweep needs dimension 1 or 2");
    if (c.sweep.grids.empty()) v.push_back("sweep.grids must not be empty");
    for (int n : c.sweep.grids)
      if (n < 2) {
        v.push_back("sweep.grids entries must be >= 2");
        break;
      }
  }

  for (const auto& [name, pr] : c.profiles)
    if (pr.samples < 1 || pr.epochs < 1) v.push_back("profiles." + name + " needs samples and epochs >= 1");
  return v;
}

inline void validate(const ExperimentConfig& c) {
  auto v = violations(c);
  if (!v.empty()) throw ConfigError(std::move(v));
}

/// Parses and validates; a ConfigError lists every structural and semantic
/// violation at once.
inline ExperimentConfig parse_config(const json& j) {
  std::vector<std::string> errors;
  ExperimentConfig c;
  detail::Reader top(j, "config", errors);
  top.read("name", c.name);
  top.read("description", c.description);
  top.read("kind", c.kind);

  detail::Reader p(top.child("problem"), "problem", errors);
  p.read("operator", c.problem.op);
  p.read("dimension", c.problem.dimension);
  p.read("boundary", c.problem.boundary);
  p.read("shift", c.problem.shift);
  p.read("constant", c.problem.constant);
  p.read("potential", c.problem.potential);
  p.reject_unknown();

  detail::Reader a(top.child("architecture"), "architecture", errors);
  a.read("layers", c.architecture.layers);
  a.read("modes", c.architecture.modes);
  a.reject_unknown();

  detail::Reader t(top.child("training"), "training", errors);
  t.read("method", c.training.method);
  t.read("samples", c.training.samples);
  t.read("epochs", c.training.epochs);
  t.read("learning_rate", c.training.learning_rate);
  t.read("seed", c.training.seed);
  t.read("sampling", c.training.sampling);
  t.read("grid_points", c.training.grid_points);
  t.read("detach_norm", c.training.detach_norm);
  t.reject_unknown();

  detail::Reader e(top.child("exact"), "exact", errors);
  e.read("name", c.exact.name);
  e.read("mode", c.exact.mode);
  e.reject_unknown();

  detail::Reader o(top.child("outputs"), "outputs", errors);
  o.read("directory", c.outputs.directory);
  o.read("record_every", c.outputs.record_every);
  o.read("histogram_bins", c.outputs.histogram_bins);
  o.read("density_points", c.outputs.density_points);
  o.read("eval_points", c.outputs.eval_points);
  o.reject_unknown();

  detail::Reader s(top.child("sweep"), "sweep", errors);
  s.read("grids", c.sweep.grids);
  s.read("with_network", c.sweep.with_network);
  s.reject_unknown();

  const json& profiles = top.child("profiles");
  if (!profiles.is_object()) {
    errors.push_back("profiles must be an object");
  } else {
    for (auto it = profiles.begin(); it != profiles.end(); ++it) {
      ProfileOverride po;
      detail::Reader r(it.value(), "profiles." + it.key(), errors);
      r.read("samples", po.samples);
      r.read("epochs", po.epochs);
      r.reject_unknown();
      c.profiles[it.key()] = po;
    }
  }
  top.reject_unknown();

  for (std::string& v : violations(c)) errors.push_back(std::move(v));
  if (!errors.empty()) throw ConfigError(std::move(errors));
  return c;
}

inline ExperimentConfig parse_config_text(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError({std::string("config is not valid JSON: ") + e.what()});
  }
  return parse_config(j);
}

inline ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config file " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config_text(ss.str());
}

/// Copy with the named profile's sample count and epoch budget. "full" with
/// no explicit entry means the base values.
inline ExperimentConfig apply_profile(ExperimentConfig c, const std::string& profile) {
  auto it = c.profiles.find(profile);
  if (it == c.profiles.end()) {
    if (profile == "full") return c;
    throw ConfigError({"profile '" + profile + "' is not defined for " + c.name});
  }
  c.training.samples = it->second.samples;
  c.training.epochs = it->second.epochs;
  return c;
}

// ------------------------------------------------------ solver translation

inline Box domain_of(const ExperimentConfig& c) {
  return c.periodic() ? Box::cube(c.problem.dimension, 0.0, 2.0 * std::numbers::pi)
                      : Box::cube(c.problem.dimension, 0.0, 1.0);
}

inline PotentialSpec potential_of(const ExperimentConfig& c) {
  if (c.problem.potential.empty()) return PotentialSpec::with_defaults(c.problem.dimension);
  return PotentialSpec{c.problem.potential};
}

/// The unshifted operator; the configured shift is applied on top.
inline OperatorSpec base_operator_of(const ExperimentConfig& c) {
  if (c.problem.op == "laplacian_plus_constant") return OperatorSpec::laplacian_plus_constant(c.problem.constant);
  if (c.problem.op == "fokker_planck") return OperatorSpec::fokker_planck(potential_of(c));
  return OperatorSpec::neg_laplacian();
}

inline Problem problem_of(const ExperimentConfig& c) {
  validate(c);
  BoundarySpec bc = c.periodic()
                        ? BoundarySpec::periodic(std::vector<double>(c.problem.dimension, 2.0 * std::numbers::pi),
                                                 c.architecture.modes)
                        : BoundarySpec::dirichlet_unit_box();
  return Problem{base_operator_of(c).shifted(c.problem.shift), std::move(bc), domain_of(c)};
}

inline TrainConfig train_config_of(const ExperimentConfig& c) {
  TrainConfig t;
  t.method = c.training.method == "pmnn" ? Method::Pmnn : Method::Ipmnn;
  t.layers = c.architecture.layers;
  t.samples = c.training.samples;
  t.epochs = c.training.epochs;
  t.learning_rate = c.training.learning_rate;
  t.seed = c.training.seed;
  t.record_every = c.outputs.record_every;
  t.detach_norm = c.training.detach_norm;
  return t;
}

/// Exact eigenpair from the catalog, lambda given for the unshifted operator.
inline std::optional<ExactSolution> exact_of(const ExperimentConfig& c) {
  const int d = c.problem.dimension;
  const int m = c.exact.mode;
  const double pi2 = std::numbers::pi * std::numbers::pi;
  if (c.exact.name == "product_of_sines") {
    const double mode_sum = d * static_cast<double>(m) * m * pi2;
    const double lambda = c.problem.op == "laplacian_plus_constant" ? c.problem.constant - mode_sum : mode_sum;
    return exact_product_of_sines(lambda, m);
  }
  if (c.exact.name == "exp_neg_potential") return exact_exp_neg_potential(potential_of(c));
  return std::nullopt;
}

}  // namespace pmnn::harness
