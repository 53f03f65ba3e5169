#pragma once

#include <algorithm>
#include <cmath>
#include <ostream>
#include <span>
#include <vector>

#include "pmnn/error.hpp"
#include "pmnn/format.hpp"

namespace pmnn::harness {

/// Equal-width histogram normalized as a probability density: the heights
/// times the bin width sum to one.
struct Histogram {
  std::vector<double> edges;    // bins + 1
  std::vector<double> density;  // bins

  int bins() const { return static_cast<int>(density.size()); }
  double bin_width() const { return edges.size() < 2 ? 0.0 : edges[1] - edges[0]; }
};

/// Histogram on the fixed range [lo, hi]; values outside it are dropped from
/// the counts but still count towards the normalization.
inline Histogram density_histogram(std::span<const double> values, int bins, double lo, double hi) {
  if (bins < 2) throw InvalidArgument("a histogram needs at least 2 bins");
  if (values.empty()) throw InvalidArgument("a histogram needs at least one value");
  if (!(hi > lo) || !std::isfinite(lo) || !std::isfinite(hi)) throw InvalidArgument("histogram range is empty");
  Histogram h;
  const double width = (hi - lo) / bins;
  h.edges.resize(static_cast<std::size_t>(bins) + 1);
  for (int b = 0; b <= bins; ++b) h.edges[b] = lo + b * width;
  h.edges.back() = hi;
  std::vector<double> counts(static_cast<std::size_t>(bins), 0.0);
  for (double v : values) {
    if (!(v >= lo && v <= hi)) continue;
    const int b = std::min(bins - 1, static_cast<int>((v - lo) / width));
    counts[b] += 1.0;
  }
  const double scale = 1.0 / (static_cast<double>(values.size()) * width);
  h.density.resize(counts.size());
  for (std::size_t b = 0; b < counts.size(); ++b) h.density[b] = counts[b] * scale;
  return h;
}

/// Histogram over the sample range. A constant sample gets a unit-wide range
/// centred on the value, so it occupies one bin of height 1/width.
inline Histogram density_histogram(std::span<const double> values, int bins) {
  if (values.empty()) throw InvalidArgument("a histogram needs at least one value");
  const auto [mn, mx] = std::minmax_element(values.begin(), values.end());
  double lo = *mn, hi = *mx;
  if (!(hi > lo)) {
    lo -= 0.5;
    hi += 0.5;
  }
  return density_histogram(values, bins, lo, hi);
}

struct DensityComparison {
  Histogram predicted;
  Histogram exact;
  double discrepancy = 0.0;  // max over bins of |predicted - exact|
};

/// Both samples are binned on common edges spanning their joint range; the
/// caller normalizes and sign-aligns beforehand.
inline DensityComparison compare_densities(std::span<const double> predicted, std::span<const double> exact,
                                           int bins) {
  if (predicted.empty() || exact.empty()) throw InvalidArgument("density comparison of an empty sample");
  const auto [pmn, pmx] = std::minmax_element(predicted.begin(), predicted.end());
  const auto [emn, emx] = std::minmax_element(exact.begin(), exact.end());
  double lo = std::min(*pmn, *emn), hi = std::max(*pmx, *emx);
  if (!(hi > lo)) {
    lo -= 0.5;
    hi += 0.5;
  }
  DensityComparison c;
  c.predicted = density_histogram(predicted, bins, lo, hi);
  c.exact = density_histogram(exact, bins, lo, hi);
  for (int b = 0; b < bins; ++b)
    c.discrepancy = std::max(c.discrepancy, std::abs(c.predicted.density[b] - c.exact.density[b]));
  return c;
}

/// bin_lo,bin_hi,predicted[,exact]
inline void write_density_csv(std::ostream& out, const Histogram& predicted, const Histogram* exact = nullptr) {
  out << "bin_lo,bin_hi,predicted" << (exact ? ",exact" : "") << '\n';
  for (int b = 0; b < predicted.bins(); ++b) {
    out << fmt_real(predicted.edges[b]) << ',' << fmt_real(predicted.edges[b + 1]) << ','
        << fmt_real(predicted.density[b]);
    if (exact) out << ',' << fmt_real(exact->density[b]);
    out << '\n';
  }
}

}  // namespace pmnn::harness
