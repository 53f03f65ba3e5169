#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "pmnn/error.hpp"
#include "pmnn/format.hpp"
#include "pmnn/sampling.hpp"

namespace pmnn::fdm {

/// Square matrix in compressed row storage, column indices sorted per row.
class SparseMatrix {
 public:
  struct Triplet {
    int row;
    int col;
    double value;
  };

  SparseMatrix() = default;

  /// Duplicate (row, col) entries are summed.
  static SparseMatrix from_triplets(int n, std::vector<Triplet> entries) {
    if (n < 1) throw InvalidArgument("matrix dimension must be positive");
    for (const Triplet& t : entries)
      if (t.row < 0 || t.row >= n || t.col < 0 || t.col >= n) throw DimensionError("entry outside the matrix");
    std::sort(entries.begin(), entries.end(),
              [](const Triplet& a, const Triplet& b) { return a.row != b.row ? a.row < b.row : a.col < b.col; });
    SparseMatrix m;
    m.n_ = n;
    m.row_offsets_.assign(static_cast<std::size_t>(n) + 1, 0);
    for (const Triplet& t : entries) {
      if (!m.cols_.empty() && m.last_row_ == t.row && m.cols_.back() == t.col) {
        m.values_.back() += t.value;
        continue;
      }
      m.cols_.push_back(t.col);
      m.values_.push_back(t.value);
      m.last_row_ = t.row;
      ++m.row_offsets_[static_cast<std::size_t>(t.row) + 1];
    }
    for (int i = 0; i < n; ++i) m.row_offsets_[i + 1] += m.row_offsets_[i];
    return m;
  }

  static SparseMatrix from_dense(const Eigen::MatrixXd& a) {
    if (a.rows() != a.cols()) throw DimensionError("matrix must be square");
    std::vector<Triplet> t;
    for (int i = 0; i < a.rows(); ++i)
      for (int j = 0; j < a.cols(); ++j)
        if (a(i, j) != 0.0) t.push_back({i, j, a(i, j)});
    return from_triplets(static_cast<int>(a.rows()), std::move(t));
  }

  int dimension() const { return n_; }
  std::size_t nonzeros() const { return values_.size(); }
  std::span<const int> row_offsets() const { return row_offsets_; }
  std::span<const int> column_indices() const { return cols_; }
  std::span<const double> values() const { return values_; }

  double coeff(int i, int j) const {
    const auto first = cols_.begin() + row_offsets_[i];
    const auto last = cols_.begin() + row_offsets_[i + 1];
    const auto it = std::lower_bound(first, last, j);
    return (it != last && *it == j) ? values_[static_cast<std::size_t>(it - cols_.begin())] : 0.0;
  }

  Eigen::VectorXd multiply(const Eigen::VectorXd& x) const {
    if (x.size() != n_) throw DimensionError("vector length does not match the matrix");
    Eigen::VectorXd y(n_);
    for (int i = 0; i < n_; ++i) {
      double acc = 0.0;
      for (int p = row_offsets_[i]; p < row_offsets_[i + 1]; ++p) acc += values_[p] * x[cols_[p]];
      y[i] = acc;
    }
    return y;
  }

  Eigen::MatrixXd to_dense() const {
    Eigen::MatrixXd a = Eigen::MatrixXd::Zero(n_, n_);
    for (int i = 0; i < n_; ++i)
      for (int p = row_offsets_[i]; p < row_offsets_[i + 1]; ++p) a(i, cols_[p]) = values_[p];
    return a;
  }

  /// Largest |i - j| over stored entries below / above the diagonal.
  std::pair<int, int> bandwidths() const {
    int lower = 0, upper = 0;
    for (int i = 0; i < n_; ++i)
      for (int p = row_offsets_[i]; p < row_offsets_[i + 1]; ++p) {
        lower = std::max(lower, i - cols_[p]);
        upper = std::max(upper, cols_[p] - i);
      }
    return {lower, upper};
  }

  bool is_symmetric() const {
    for (int i = 0; i < n_; ++i)
      for (int p = row_offsets_[i]; p < row_offsets_[i + 1]; ++p)
        if (coeff(cols_[p], i) != values_[p]) return false;
    return true;
  }

  /// A - s I
  SparseMatrix shifted(double s) const {
    std::vector<Triplet> t;
    t.reserve(values_.size() + static_cast<std::size_t>(n_));
    for (int i = 0; i < n_; ++i) {
      for (int p = row_offsets_[i]; p < row_offsets_[i + 1]; ++p) t.push_back({i, cols_[p], values_[p]});
      if (s != 0.0) t.push_back({i, i, -s});
    }
    return from_triplets(n_, std::move(t));
  }

 private:
  int n_ = 0;
  int last_row_ = -1;
  std::vector<int> row_offsets_;
  std::vector<int> cols_;
  std::vector<double> values_;
};

/// 3-point (d=1) or 5-point (d=2) stencil for -Laplacian on the unit
/// interval/square with homogeneous Dirichlet data, h = 1/(n_h+1), scaled by
/// 1/h^2. Unknowns are ordered with the first coordinate varying fastest, the
/// same order uniform_grid uses.
inline SparseMatrix assemble_neg_laplacian(int d, int n_h) {
  if (d != 1 && d != 2) throw InvalidArgument("finite differences support d = 1 or 2, got " + std::to_string(d));
  if (n_h < 2) throw InvalidArgument("n_h must be at least 2");
  const double h = grid_spacing(n_h);
  const double s = 1.0 / (h * h);
  const int n = d == 1 ? n_h : n_h * n_h;
  std::vector<SparseMatrix::Triplet> t;
  t.reserve(static_cast<std::size_t>(n) * (2 * d + 1));
  auto at = [n_h](int i, int j) { return i + n_h * j; };
  if (d == 1) {
    for (int i = 0; i < n_h; ++i) {
      if (i > 0) t.push_back({i, i - 1, -s});
      t.push_back({i, i, 2.0 * s});
      if (i + 1 < n_h) t.push_back({i, i + 1, -s});
    }
  } else {
    for (int j = 0; j < n_h; ++j)
      for (int i = 0; i < n_h; ++i) {
        const int r = at(i, j);
        if (j > 0) t.push_back({r, at(i, j - 1), -s});
        if (i > 0) t.push_back({r, at(i - 1, j), -s});
        t.push_back({r, r, 4.0 * s});
        if (i + 1 < n_h) t.push_back({r, at(i + 1, j), -s});
        if (j + 1 < n_h) t.push_back({r, at(i, j + 1), -s});
      }
  }
  return SparseMatrix::from_triplets(n, std::move(t));
}

/// LU factorization with partial pivoting, P A = L U. Banded storage keeps the
/// fill inside the band (upper bandwidth grows to kl + ku under pivoting);
/// dense storage delegates to Eigen.
class LuFactors {
 public:
  enum class Storage { Dense, Banded };

  static LuFactors dense(const Eigen::MatrixXd& a) {
    if (a.rows() != a.cols()) throw DimensionError("LU of a non-square matrix");
    LuFactors f;
    f.storage_ = Storage::Dense;
    f.n_ = static_cast<int>(a.rows());
    f.dense_.compute(a);
    const double scale = a.cwiseAbs().maxCoeff();
    const Eigen::VectorXd diag = f.dense_.matrixLU().diagonal();
    for (int i = 0; i < f.n_; ++i)
      if (!(std::abs(diag[i]) > singular_threshold(f.n_, scale)))
        throw SingularMatrixError("matrix is singular to working precision (pivot " + std::to_string(i) + ")");
    return f;
  }

  static LuFactors banded(const SparseMatrix& a) {
    LuFactors f;
    f.storage_ = Storage::Banded;
    const int n = a.dimension();
    f.n_ = n;
    std::tie(f.kl_, f.ku_) = a.bandwidths();
    const int kl = f.kl_;
    const int ku = f.ku_ + f.kl_;
    f.band_ = Eigen::MatrixXd::Zero(2 * f.kl_ + f.ku_ + 1, n);
    f.pivots_.assign(static_cast<std::size_t>(n), 0);
    double scale = 0.0;
    for (int i = 0; i < n; ++i)
      for (int p = a.row_offsets()[i]; p < a.row_offsets()[i + 1]; ++p) {
        const int j = a.column_indices()[p];
        f.at(i, j) = a.values()[p];
        scale = std::max(scale, std::abs(a.values()[p]));
      }
    const double tiny = singular_threshold(n, scale);
    for (int k = 0; k < n; ++k) {
      const int last_row = std::min(n - 1, k + kl);
      const int last_col = std::min(n - 1, k + ku);
      int p = k;
      for (int i = k + 1; i <= last_row; ++i)
        if (std::abs(f.at(i, k)) > std::abs(f.at(p, k))) p = i;
      if (!(std::abs(f.at(p, k)) > tiny))
        throw SingularMatrixError("matrix is singular to working precision (pivot " + std::to_string(k) + ")");
      f.pivots_[k] = p;
      if (p != k)
        for (int j = k; j <= last_col; ++j) std::swap(f.at(k, j), f.at(p, j));
      const double pivot = f.at(k, k);
      for (int i = k + 1; i <= last_row; ++i) {
        const double l = f.at(i, k) / pivot;
        f.at(i, k) = l;
        if (l == 0.0) continue;
        for (int j = k + 1; j <= last_col; ++j) f.at(i, j) -= l * f.at(k, j);
      }
    }
    return f;
  }

  /// Banded storage when the band is narrow compared with n, dense otherwise.
  static LuFactors factor(const SparseMatrix& a) {
    const auto [kl, ku] = a.bandwidths();
    if (2 * kl + ku + 1 < a.dimension() / 2) return banded(a);
    return dense(a.to_dense());
  }

  Storage storage() const { return storage_; }
  int dimension() const { return n_; }

  Eigen::VectorXd solve(const Eigen::VectorXd& b) const {
    if (b.size() != n_) throw DimensionError("right-hand side length does not match the factorization");
    if (storage_ == Storage::Dense) return dense_.solve(b);
    Eigen::VectorXd x = b;
    const int kl = kl_;
    const int ku = ku_ + kl_;
    for (int k = 0; k < n_; ++k) {
      if (pivots_[k] != k) std::swap(x[k], x[pivots_[k]]);
      const int last = std::min(n_ - 1, k + kl);
      for (int i = k + 1; i <= last; ++i) x[i] -= at(i, k) * x[k];
    }
    for (int k = n_ - 1; k >= 0; --k) {
      const int last = std::min(n_ - 1, k + ku);
      double acc = x[k];
      for (int j = k + 1; j <= last; ++j) acc -= at(k, j) * x[j];
      x[k] = acc / at(k, k);
    }
    return x;
  }

  /// Dense unit-lower factor of P A = L U.
  Eigen::MatrixXd lower() const {
    if (storage_ == Storage::Dense) {
      Eigen::MatrixXd l = dense_.matrixLU().triangularView<Eigen::StrictlyLower>();
      l.diagonal().setOnes();
      return l;
    }
    // Interchanges made at later steps also permute earlier multipliers.
    Eigen::MatrixXd l = Eigen::MatrixXd::Identity(n_, n_);
    for (int k = 0; k < n_; ++k) {
      if (pivots_[k] != k) l.row(k).head(k).swap(l.row(pivots_[k]).head(k));
      for (int i = k + 1; i <= std::min(n_ - 1, k + kl_); ++i) l(i, k) = at(i, k);
    }
    return l;
  }

  Eigen::MatrixXd upper() const {
    if (storage_ == Storage::Dense) return dense_.matrixLU().triangularView<Eigen::Upper>();
    Eigen::MatrixXd u = Eigen::MatrixXd::Zero(n_, n_);
    for (int k = 0; k < n_; ++k)
      for (int j = k; j <= std::min(n_ - 1, k + ku_ + kl_); ++j) u(k, j) = at(k, j);
    return u;
  }

  Eigen::MatrixXd permutation() const {
    if (storage_ == Storage::Dense) return dense_.permutationP().toDenseMatrix().cast<double>();
    std::vector<int> order(static_cast<std::size_t>(n_));
    for (int i = 0; i < n_; ++i) order[i] = i;
    for (int k = 0; k < n_; ++k) std::swap(order[k], order[pivots_[k]]);
    Eigen::MatrixXd p = Eigen::MatrixXd::Zero(n_, n_);
    for (int i = 0; i < n_; ++i) p(i, order[i]) = 1.0;
    return p;
  }

  /// P^T L U, which should equal the factored matrix.
  Eigen::MatrixXd reconstruct() const { return permutation().transpose() * lower() * upper(); }

 private:
  static double singular_threshold(int n, double scale) {
    return static_cast<double>(n) * std::numeric_limits<double>::epsilon() * scale;
  }

  // LAPACK-style band layout: A(i, j) lives at band_(ku + kl + i - j, j), with
  // room above the original band for pivoting fill.
  double& at(int i, int j) { return band_(ku_ + kl_ + i - j, j); }
  double at(int i, int j) const { return band_(ku_ + kl_ + i - j, j); }

  Storage storage_ = Storage::Dense;
  int n_ = 0;
  int kl_ = 0;
  int ku_ = 0;
  Eigen::MatrixXd band_;
  std::vector<int> pivots_;
  Eigen::PartialPivLU<Eigen::MatrixXd> dense_;
};

struct IterationResult {
  double lambda = 0.0;
  Eigen::VectorXd vector;
  int iterations = 0;
  bool converged = false;
};

namespace detail {

inline Eigen::VectorXd unit_start(const Eigen::VectorXd& u0, int n) {
  if (u0.size() != n) throw DimensionError("start vector length does not match the matrix");
  const double norm = u0.norm();
  if (!(norm > 0.0) || !std::isfinite(norm)) throw InvalidArgument("start vector must be nonzero and finite");
  return u0 / norm;
}

// Distance between successive unit iterates, blind to a sign flip so that a
// negative dominant eigenvalue can still meet the tolerance.
inline double step_change(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  return std::min((a - b).norm(), (a + b).norm());
}

template <class Apply, class Quotient>
IterationResult iterate(Eigen::VectorXd u, int k_max, double tol, Apply&& apply, Quotient&& quotient) {
  if (k_max < 1) throw InvalidArgument("k_max must be positive");
  if (!(tol > 0.0)) throw InvalidArgument("tolerance must be positive");
  IterationResult r;
  for (int k = 1; k <= k_max; ++k) {
    Eigen::VectorXd p = apply(u);
    const double norm = p.norm();
    if (!(norm > 0.0) || !std::isfinite(norm)) throw DegenerateError("iterate collapsed to zero", k);
    p /= norm;
    const double change = step_change(p, u);
    u = std::move(p);
    r.iterations = k;
    if (change < tol) {
      r.converged = true;
      break;
    }
  }
  r.lambda = quotient(u);
  r.vector = std::move(u);
  return r;
}

}  // namespace detail

/// Dominant eigenpair by repeated multiplication. lambda = u^T A u with the
/// unit-length final iterate. A non-converged result is still returned, with
/// `converged` false.
inline IterationResult power_method(const SparseMatrix& a, const Eigen::VectorXd& u0, int k_max, double tol) {
  return detail::iterate(
      detail::unit_start(u0, a.dimension()), k_max, tol, [&](const Eigen::VectorXd& u) { return a.multiply(u); },
      [&](const Eigen::VectorXd& u) { return u.dot(a.multiply(u)); });
}

inline IterationResult power_method(const Eigen::MatrixXd& a, const Eigen::VectorXd& u0, int k_max, double tol) {
  return power_method(SparseMatrix::from_dense(a), u0, k_max, tol);
}

/// Eigenpair whose eigenvalue is nearest `shift`: A - shift I is factored once
/// and applied through its inverse. lambda is the quotient of the unshifted A.
inline IterationResult inverse_power_method(const SparseMatrix& a, const Eigen::VectorXd& u0, int k_max, double tol,
                                            double shift = 0.0) {
  if (!std::isfinite(shift)) throw InvalidArgument("shift must be finite");
  const LuFactors lu = LuFactors::factor(a.shifted(shift));
  return detail::iterate(
      detail::unit_start(u0, a.dimension()), k_max, tol, [&](const Eigen::VectorXd& u) { return lu.solve(u); },
      [&](const Eigen::VectorXd& u) { return u.dot(a.multiply(u)); });
}

inline IterationResult inverse_power_method(const Eigen::MatrixXd& a, const Eigen::VectorXd& u0, int k_max,
                                            double tol, double shift = 0.0) {
  return inverse_power_method(SparseMatrix::from_dense(a), u0, k_max, tol, shift);
}

/// (2/h^2)(1 - cos(m pi h)) summed over dimensions: the exact discrete
/// eigenvalue of the assembled matrix for mode m in every direction.
inline double discrete_eigenvalue(int d, int n_h, int mode = 1) {
  const double h = grid_spacing(n_h);
  return d * (2.0 / (h * h)) * (1.0 - std::cos(mode * std::numbers::pi * h));
}

struct ReferenceError {
  int n_h = 0;
  double lambda = 0.0;
  double lambda_err = 0.0;  // |lambda_fdm - d pi^2|
  double u_err = 0.0;       // max |u_fdm - u_exact|, both RMS-normalized and sign-aligned
  int iterations = 0;
};

/// Smallest eigenpair of the assembled -Laplacian against the continuous
/// solution d pi^2, prod sin(pi x_i).
inline ReferenceError fdm_reference_error(int d, int n_h, int k_max = 10000, double tol = 1e-12) {
  const SparseMatrix a = assemble_neg_laplacian(d, n_h);
  const SampleSet grid = uniform_grid(n_h, d, Box::cube(d, 0.0, 1.0));
  Eigen::ArrayXd exact = Eigen::ArrayXd::Ones(grid.size());
  for (int i = 0; i < d; ++i) exact *= (std::numbers::pi * grid.points.row(i).transpose()).sin();
  const IterationResult r = inverse_power_method(a, Eigen::VectorXd::Ones(a.dimension()), k_max, tol, 0.0);
  if (!r.converged) throw DegenerateError("inverse iteration did not converge", r.iterations);

  // The iterate has unit Euclidean length; rescale both to unit RMS norm.
  const Eigen::ArrayXd e = normalize(exact);
  Eigen::ArrayXd u = normalize(r.vector.array());
  if ((u * e).sum() < 0.0) u = -u;

  ReferenceError out;
  out.n_h = n_h;
  out.lambda = r.lambda;
  out.lambda_err = std::abs(r.lambda - d * std::numbers::pi * std::numbers::pi);
  out.u_err = (u - e).abs().maxCoeff();
  out.iterations = r.iterations;
  return out;
}

/// The default grid sweep {8, 16, 32, 64}; the values are a free choice.
inline std::vector<int> default_sweep() { return {8, 16, 32, 64}; }

inline std::vector<ReferenceError> fdm_sweep(int d, std::span<const int> grid_sizes) {
  std::vector<ReferenceError> out;
  for (int n_h : grid_sizes) out.push_back(fdm_reference_error(d, n_h));
  return out;
}

inline void write_sweep_csv(std::ostream& out, std::span<const ReferenceError> rows) {
  out << "n_h,lambda_err,u_err\n";
  for (const ReferenceError& r : rows) out << r.n_h << ',' << fmt_real(r.lambda_err) << ',' << fmt_real(r.u_err) << '\n';
}

}  // namespace pmnn::fdm
