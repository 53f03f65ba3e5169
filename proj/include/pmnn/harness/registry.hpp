#pragma once

#include <string>
#include <vector>

#include "pmnn/harness/config.hpp"

namespace pmnn::harness {

namespace detail {

inline std::vector<int> mlp(int in, int width) { return {in, width, width, width, width, 1}; }

struct Scale {
  int samples;
  int epochs;
  int width;
};

// Sample count, epoch budget and hidden width per dimension for the
// Dirichlet problems.
inline Scale dirichlet_scale(int d) {
  switch (d) {
    case 1: return {10000, 50000, 20};
    case 2: return {20000, 50000, 20};
    case 5: return {50000, 50000, 40};
    default: return {100000, 100000, 80};
  }
}

inline Scale periodic_scale(int d) {
  switch (d) {
    case 1: return {10000, 50000, 20};
    case 2: return {20000, 50000, 40};
    case 5: return {50000, 50000, 60};
    default: return {100000, 100000, 80};
  }
}

inline ExperimentConfig base(std::string name, std::string description) {
  ExperimentConfig c;
  c.name = std::move(name);
  c.description = std::move(description);
  c.profiles["desk"] = {2000, 20000};
  return c;
}

}  // namespace detail

/// The shipped experiments: PMNN on Delta + 100, IPMNN on -Delta, IPMNN on
/// the shifted Fokker-Planck operator (each for d = 1, 2, 5, 10), interior
/// eigenvalues near alpha = 36, 81, 144, 225, and the finite-difference sweep.
inline std::vector<ExperimentConfig> registry() {
  std::vector<ExperimentConfig> out;
  for (int d : {1, 2, 5, 10}) {
    const auto s = detail::dirichlet_scale(d);
    auto c = detail::base("pmnn-d" + std::to_string(d),
                          "largest eigenvalue of Delta u + 100 u on [0,1]^" + std::to_string(d) + ", PMNN");
    c.problem.op = "laplacian_plus_constant";
    c.problem.dimension = d;
    c.architecture.layers = detail::mlp(d, s.width);
    c.training.method = "pmnn";
    c.training.samples = s.samples;
    c.training.epochs = s.epochs;
    c.exact.name = "product_of_sines";
    out.push_back(c);
  }
  for (int d : {1, 2, 5, 10}) {
    const auto s = detail::dirichlet_scale(d);
    auto c = detail::base("ipmnn-d" + std::to_string(d),
                          "smallest eigenvalue of -Delta on [0,1]^" + std::to_string(d) + ", IPMNN");
    c.problem.dimension = d;
    c.architecture.layers = detail::mlp(d, s.width);
    c.training.method = "ipmnn";
    c.training.samples = s.samples;
    c.training.epochs = s.epochs;
    c.exact.name = "product_of_sines";
    out.push_back(c);
  }
  for (int d : {1, 2, 5, 10}) {
    const auto s = detail::periodic_scale(d);
    auto c = detail::base("ipmnn-fp-d" + std::to_string(d),
                          "zero eigenvalue of the Fokker-Planck operator on [0,2pi]^" + std::to_string(d) +
                              ", IPMNN on L + I");
    c.problem.op = "fokker_planck";
    c.problem.dimension = d;
    c.problem.boundary = "periodic";
    c.problem.shift = -1.0;
    c.architecture.modes = 3;
    c.architecture.layers = detail::mlp(2 * d * 3, s.width);
    c.training.method = "ipmnn";
    c.training.samples = s.samples;
    c.training.epochs = s.epochs;
    c.exact.name = "exp_neg_potential";
    out.push_back(c);
  }
  for (int m : {2, 3, 4, 5}) {
    const int alpha = m * m * 9;
    auto c = detail::base("interior-a" + std::to_string(alpha),
                          "eigenvalue of -Delta on [0,1] nearest " + std::to_string(alpha) + ", IPMNN on -Delta - " +
                              std::to_string(alpha) + " I");
    c.problem.shift = alpha;
    c.architecture.layers = detail::mlp(1, 20);
    c.training.method = "ipmnn";
    c.training.samples = 10000;
    c.training.epochs = 50000;
    c.exact.name = "product_of_sines";
    c.exact.mode = m;
    out.push_back(c);
  }
  {
    auto c = detail::base("fdm-sweep",
                          "finite differences against IPMNN trained on the same uniform grid, -Delta on [0,1]^2");
    c.kind = "fdm_sweep";
    c.problem.dimension = 2;
    c.architecture.layers = detail::mlp(2, 20);
    c.training.method = "ipmnn";
    c.training.sampling = "grid";
    c.training.grid_points = 8;  // replaced by each sweep point
    c.training.samples = 64;
    c.training.epochs = 50000;
    c.exact.name = "product_of_sines";
    c.profiles["desk"] = {64, 20000};
    out.push_back(c);
  }
  return out;
}

inline std::vector<std::string> registry_names() {
  std::vector<std::string> names;
  for (const auto& c : registry()) names.push_back(c.name);
  return names;
}

inline std::optional<ExperimentConfig> find_config(const std::string& name) {
  for (auto& c : registry())
    if (c.name == name) return c;
  return std::nullopt;
}

}  // namespace pmnn::harness
