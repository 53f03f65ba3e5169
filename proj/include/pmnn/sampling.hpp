#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <ostream>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "pmnn/error.hpp"
#include "pmnn/format.hpp"

namespace pmnn {

/// Axis-aligned box [lo_i, hi_i] per dimension.
struct Box {
  std::vector<double> lo;
  std::vector<double> hi;

  static Box cube(int d, double lo, double hi) {
    return Box{std::vector<double>(d, lo), std::vector<double>(d, hi)};
  }

  int dimension() const { return static_cast<int>(lo.size()); }

  void validate() const {
    if (lo.size() != hi.size() || lo.empty()) throw InvalidArgument("box bounds must be non-empty and paired");
    for (std::size_t i = 0; i < lo.size(); ++i)
      if (!(lo[i] < hi[i]))
        throw InvalidArgument("invalid box: lo >= hi in dimension " + std::to_string(i));
  }

  bool contains(const Eigen::VectorXd& x) const {
    for (int i = 0; i < dimension(); ++i)
      if (x[i] < lo[i] || x[i] > hi[i]) return false;
    return true;
  }
};

/// Collocation points, one per column (d x N).
struct SampleSet {
  Eigen::ArrayXXd points;
  Box box;

  int dimension() const { return static_cast<int>(points.rows()); }
  Eigen::Index size() const { return points.cols(); }
};

/// Latin hypercube design: in every dimension each of the n equal-width
/// strata holds exactly one point, placed uniformly inside its stratum.
inline SampleSet lhs_sample(int n, int d, const Box& box, std::uint64_t seed) {
  if (n < 1 || d < 1) throw InvalidArgument("lhs needs n >= 1 and d >= 1");
  box.validate();
  if (box.dimension() != d) throw DimensionError("box dimension does not match d");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  SampleSet s{Eigen::ArrayXXd(d, n), box};
  std::vector<int> perm(n);
  for (int i = 0; i < d; ++i) {
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), rng);
    const double width = box.hi[i] - box.lo[i];
    for (int j = 0; j < n; ++j) {
      const double t = (perm[j] + unit(rng)) / n;
      // Clamp so rounding can never leave the stratum's closed box.
      s.points(i, j) = std::clamp(box.lo[i] + t * width, box.lo[i], box.hi[i]);
    }
  }
  return s;
}

/// Interior tensor grid with n_h points per axis at lo + k h, k = 1..n_h,
/// h = (hi - lo)/(n_h + 1). The first coordinate varies fastest, which is
/// also the unknown ordering of the finite-difference matrices.
inline double grid_spacing(int n_h, double lo = 0.0, double hi = 1.0) { return (hi - lo) / (n_h + 1); }

inline SampleSet uniform_grid(int n_h, int d, const Box& box) {
  if (n_h < 2) throw InvalidArgument("uniform grid needs n_h >= 2");
  if (d < 1) throw InvalidArgument("uniform grid needs d >= 1");
  box.validate();
  if (box.dimension() != d) throw DimensionError("box dimension does not match d");
  Eigen::Index total = 1;
  for (int i = 0; i < d; ++i) total *= n_h;
  SampleSet s{Eigen::ArrayXXd(d, total), box};
  for (Eigen::Index p = 0; p < total; ++p) {
    Eigen::Index rest = p;
    for (int i = 0; i < d; ++i) {
      const int k = static_cast<int>(rest % n_h);
      rest /= n_h;
      s.points(i, p) = box.lo[i] + (k + 1) * grid_spacing(n_h, box.lo[i], box.hi[i]);
    }
  }
  return s;
}

/// Uniform random points (not stratified), for density diagnostics.
inline SampleSet uniform_random(Eigen::Index n, const Box& box, std::uint64_t seed) {
  box.validate();
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  SampleSet s{Eigen::ArrayXXd(box.dimension(), n), box};
  for (Eigen::Index j = 0; j < n; ++j)
    for (int i = 0; i < box.dimension(); ++i) s.points(i, j) = box.lo[i] + unit(rng) * (box.hi[i] - box.lo[i]);
  return s;
}

/// sqrt((1/N) sum v_i^2)
inline double discrete_norm(std::span<const double> values) {
  if (values.empty()) throw InvalidArgument("discrete norm of an empty sample");
  double acc = 0.0;
  for (double v : values) acc += v * v;
  return std::sqrt(acc / static_cast<double>(values.size()));
}

inline double discrete_norm(const Eigen::ArrayXd& values) {
  return discrete_norm(std::span<const double>(values.data(), static_cast<std::size_t>(values.size())));
}

inline Eigen::ArrayXd normalize(const Eigen::ArrayXd& values) {
  const double n = discrete_norm(values);
  if (!(n > 0.0)) throw DegenerateError("cannot normalize a zero function");
  return values / n;
}

/// One row per point, columns x0..x{d-1}.
inline void write_csv(std::ostream& out, const SampleSet& s) {
  for (int i = 0; i < s.dimension(); ++i) out << (i ? "," : "") << "x" << i;
  out << '\n';
  for (Eigen::Index j = 0; j < s.size(); ++j) {
    for (int i = 0; i < s.dimension(); ++i) out << (i ? "," : "") << fmt_real(s.points(i, j));
    out << '\n';
  }
}

}  // namespace pmnn
