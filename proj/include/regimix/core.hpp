#pragma once

// Data types for sampled curves, regression design matrices, and the
// log-domain density primitives every model in the library builds on.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <numbers>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace regimix {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

// Errors are split by cause so the CLI can map them onto exit codes.
struct ConfigError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};
struct DataError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct NumericalError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Ordered sampling instants shared by every curve of a data set.
class TimeGrid {
 public:
  explicit TimeGrid(std::vector<double> points) {
    if (points.size() < 2) throw DataError("time grid needs at least 2 points");
    for (std::size_t j = 0; j < points.size(); ++j) {
      if (!std::isfinite(points[j])) throw DataError("time grid has a non-finite point");
      if (j > 0 && !(points[j - 1] < points[j]))
        throw DataError("time grid must be strictly increasing");
    }
    points_ = Eigen::Map<const VectorXd>(points.data(), static_cast<Index>(points.size()));
  }

  /// m evenly spaced points covering [start, stop].
  static TimeGrid uniform(double start, double stop, Index m) {
    if (m < 2) throw DataError("time grid needs at least 2 points");
    std::vector<double> pts(static_cast<std::size_t>(m));
    for (Index j = 0; j < m; ++j)
      pts[static_cast<std::size_t>(j)] =
          start + (stop - start) * static_cast<double>(j) / static_cast<double>(m - 1);
    return TimeGrid(std::move(pts));
  }

  Index size() const { return points_.size(); }
  double operator[](Index j) const { return points_[j]; }
  double front() const { return points_[0]; }
  double back() const { return points_[points_.size() - 1]; }
  const VectorXd& points() const { return points_; }

  friend bool operator==(const TimeGrid& a, const TimeGrid& b) {
    return a.points_.size() == b.points_.size() && (a.points_.array() == b.points_.array()).all();
  }

 private:
  VectorXd points_;
};

using GridPtr = std::shared_ptr<const TimeGrid>;

inline GridPtr make_grid(TimeGrid grid) { return std::make_shared<const TimeGrid>(std::move(grid)); }

/// Read-only view of one curve's m values (a row of a curve matrix).
using CurveView = Eigen::Ref<const VectorXd, 0, Eigen::InnerStride<>>;

class Curve {
 public:
  Curve(GridPtr grid, VectorXd values) : grid_(std::move(grid)), values_(std::move(values)) {
    if (!grid_) throw DataError("curve has no grid");
    if (values_.size() != grid_->size())
      throw DataError("curve length " + std::to_string(values_.size()) + " does not match grid length " +
                      std::to_string(grid_->size()));
    if (!values_.allFinite()) throw DataError("curve has non-finite values");
  }

  const TimeGrid& grid() const { return *grid_; }
  const GridPtr& grid_ptr() const { return grid_; }
  const VectorXd& values() const { return values_; }
  Index size() const { return values_.size(); }

 private:
  GridPtr grid_;
  VectorXd values_;
};

/// Unlabeled set of curves on one grid, stored one curve per row (n x m).
/// This is what a per-class fitter sees.
class CurveSet {
 public:
  CurveSet(GridPtr grid, MatrixXd values) : grid_(std::move(grid)), values_(std::move(values)) {
    if (!grid_) throw DataError("curve set has no grid");
    if (values_.cols() != grid_->size()) throw DataError("curve matrix width does not match grid length");
    if (!values_.allFinite()) throw DataError("curve set has non-finite values");
  }

  Index n() const { return values_.rows(); }
  Index m() const { return values_.cols(); }
  const TimeGrid& grid() const { return *grid_; }
  const GridPtr& grid_ptr() const { return grid_; }
  const MatrixXd& values() const { return values_; }
  CurveView curve(Index i) const { return values_.row(i).transpose(); }

 private:
  GridPtr grid_;
  MatrixXd values_;
};

/// Curves with 1-based class labels; every class 1..G has at least one curve.
class LabeledCurveSet {
 public:
  LabeledCurveSet(GridPtr grid, MatrixXd values, std::vector<int> labels)
      : curves_(std::move(grid), std::move(values)), labels_(std::move(labels)) {
    if (static_cast<Index>(labels_.size()) != curves_.n())
      throw DataError("label count does not match curve count");
    if (labels_.empty()) throw DataError("empty curve set");
    num_classes_ = *std::max_element(labels_.begin(), labels_.end());
    if (*std::min_element(labels_.begin(), labels_.end()) < 1) throw DataError("class labels must be >= 1");
    counts_.assign(static_cast<std::size_t>(num_classes_), 0);
    for (int y : labels_) ++counts_[static_cast<std::size_t>(y - 1)];
    for (int g = 0; g < num_classes_; ++g)
      if (counts_[static_cast<std::size_t>(g)] == 0)
        throw DataError("class " + std::to_string(g + 1) + " has no curves");
  }

  Index n() const { return curves_.n(); }
  Index m() const { return curves_.m(); }
  int num_classes() const { return num_classes_; }
  const TimeGrid& grid() const { return curves_.grid(); }
  const GridPtr& grid_ptr() const { return curves_.grid_ptr(); }
  const MatrixXd& values() const { return curves_.values(); }
  const std::vector<int>& labels() const { return labels_; }
  int label(Index i) const { return labels_[static_cast<std::size_t>(i)]; }
  Index class_size(int g) const { return counts_.at(static_cast<std::size_t>(g - 1)); }
  CurveView curve_view(Index i) const { return curves_.curve(i); }
  Curve curve(Index i) const { return Curve(grid_ptr(), values().row(i).transpose()); }

  /// Indices (0-based, ascending) of the curves labeled g.
  std::vector<Index> class_indices(int g) const {
    std::vector<Index> idx;
    for (Index i = 0; i < n(); ++i)
      if (label(i) == g) idx.push_back(i);
    return idx;
  }

  /// The curves of class g as an unlabeled set, in data order.
  CurveSet class_slice(int g) const { return CurveSet(grid_ptr(), select_rows(class_indices(g))); }

  LabeledCurveSet subset(std::span<const Index> indices) const {
    std::vector<int> lab;
    lab.reserve(indices.size());
    for (Index i : indices) lab.push_back(label(i));
    return LabeledCurveSet(grid_ptr(), select_rows(indices), std::move(lab));
  }

 private:
  MatrixXd select_rows(std::span<const Index> indices) const {
    MatrixXd out(static_cast<Index>(indices.size()), m());
    for (std::size_t r = 0; r < indices.size(); ++r) out.row(static_cast<Index>(r)) = values().row(indices[r]);
    return out;
  }

  CurveSet curves_;
  std::vector<int> labels_;
  std::vector<Index> counts_;
  int num_classes_ = 0;
};

// ---------------------------------------------------------------------------
// Design matrices

enum class BasisKind { polynomial, bspline };

struct BasisSpec {
  BasisKind kind = BasisKind::polynomial;
  int degree = 0;          // polynomial
  int order = 4;           // bspline (order 4 = cubic)
  int interior_knots = 10; // bspline

  static BasisSpec polynomial(int degree) { return {BasisKind::polynomial, degree, 4, 10}; }
  static BasisSpec bspline(int order, int interior_knots) { return {BasisKind::bspline, 0, order, interior_knots}; }

  Index columns() const { return kind == BasisKind::polynomial ? degree + 1 : interior_knots + order; }
  friend bool operator==(const BasisSpec&, const BasisSpec&) = default;
};

struct DesignMatrix {
  MatrixXd entries;  // m x d
  BasisSpec spec;

  Index rows() const { return entries.rows(); }
  Index cols() const { return entries.cols(); }
};

/// Rows (1, t_j, ..., t_j^degree).
inline DesignMatrix vandermonde(const TimeGrid& grid, int degree) {
  if (degree < 0) throw ConfigError("polynomial degree must be >= 0");
  const Index m = grid.size();
  MatrixXd x(m, degree + 1);
  for (Index j = 0; j < m; ++j) {
    double v = 1.0;
    for (int c = 0; c <= degree; ++c) {
      x(j, c) = v;
      v *= grid[j];
    }
  }
  return {std::move(x), BasisSpec::polynomial(degree)};
}

/// Clamped knot vector: `order` copies of each boundary, uniform interior knots.
inline std::vector<double> bspline_knots(const TimeGrid& grid, int order, int interior_knots) {
  const double a = grid.front(), b = grid.back();
  std::vector<double> knots;
  knots.reserve(static_cast<std::size_t>(2 * order + interior_knots));
  for (int i = 0; i < order; ++i) knots.push_back(a);
  for (int i = 1; i <= interior_knots; ++i)
    knots.push_back(a + (b - a) * static_cast<double>(i) / static_cast<double>(interior_knots + 1));
  for (int i = 0; i < order; ++i) knots.push_back(b);
  return knots;
}

/// B-spline basis evaluated on the grid (de Boor's triangular scheme). The
/// right boundary is assigned to the last non-empty knot span so rows still
/// sum to one at t_m.
inline DesignMatrix bspline_basis(const TimeGrid& grid, int order, int interior_knots) {
  if (order < 1) throw ConfigError("spline order must be >= 1");
  if (interior_knots < 0) throw ConfigError("interior knot count must be >= 0");
  const Index m = grid.size();
  const Index d = interior_knots + order;
  if (d > m) throw ConfigError("spline basis has more columns than grid points");

  const std::vector<double> knots = bspline_knots(grid, order, interior_knots);
  const int last_span = order - 1 + interior_knots;  // index of last non-empty span [k_s, k_{s+1})
  MatrixXd x = MatrixXd::Zero(m, d);
  std::vector<double> n(static_cast<std::size_t>(order)), left(static_cast<std::size_t>(order)),
      right(static_cast<std::size_t>(order));

  for (Index j = 0; j < m; ++j) {
    const double t = grid[j];
    int span = order - 1;
    while (span < last_span && t >= knots[static_cast<std::size_t>(span + 1)]) ++span;

    n[0] = 1.0;
    for (int deg = 1; deg < order; ++deg) {
      left[static_cast<std::size_t>(deg)] = t - knots[static_cast<std::size_t>(span + 1 - deg)];
      right[static_cast<std::size_t>(deg)] = knots[static_cast<std::size_t>(span + deg)] - t;
      double saved = 0.0;
      for (int r = 0; r < deg; ++r) {
        const double denom = right[static_cast<std::size_t>(r + 1)] + left[static_cast<std::size_t>(deg - r)];
        const double temp = n[static_cast<std::size_t>(r)] / denom;
        n[static_cast<std::size_t>(r)] = saved + right[static_cast<std::size_t>(r + 1)] * temp;
        saved = left[static_cast<std::size_t>(deg - r)] * temp;
      }
      n[static_cast<std::size_t>(deg)] = saved;
    }
    for (int r = 0; r < order; ++r) x(j, span - (order - 1) + r) = n[static_cast<std::size_t>(r)];
  }
  return {std::move(x), BasisSpec::bspline(order, interior_knots)};
}

inline DesignMatrix make_design(const TimeGrid& grid, const BasisSpec& spec) {
  return spec.kind == BasisKind::polynomial ? vandermonde(grid, spec.degree)
                                            : bspline_basis(grid, spec.order, spec.interior_knots);
}

// ---------------------------------------------------------------------------
// Log-domain primitives

inline constexpr double kLog2Pi = 1.8378770664093454835606594728112;  // log(2*pi)
inline constexpr double kNegInf = -std::numeric_limits<double>::infinity();

inline double gaussian_logpdf(double x, double mean, double variance) {
  if (!(variance > 0.0)) throw NumericalError("non-positive variance in gaussian_logpdf");
  const double r = x - mean;
  return -0.5 * (kLog2Pi + std::log(variance) + r * r / variance);
}

/// log(sum(exp(values))) with max shifting; all -inf input gives -inf.
inline double logsumexp(std::span<const double> values) {
  if (values.empty()) throw std::invalid_argument("logsumexp of an empty vector");
  const double mx = *std::max_element(values.begin(), values.end());
  if (mx == kNegInf) return kNegInf;
  if (mx == std::numeric_limits<double>::infinity()) return mx;
  double s = 0.0;
  for (double v : values) s += std::exp(v - mx);
  return mx + std::log(s);
}

template <typename Derived>
double logsumexp(const Eigen::DenseBase<Derived>& values) {
  const auto& v = values.derived();
  if (v.size() == 0) throw std::invalid_argument("logsumexp of an empty vector");
  const double mx = v.maxCoeff();
  if (mx == kNegInf) return kNegInf;
  if (mx == std::numeric_limits<double>::infinity()) return mx;
  return mx + std::log((v.array() - mx).exp().sum());
}

/// Population variance of every entry; used to scale the variance floor.
inline double pooled_variance(const MatrixXd& values) {
  if (values.size() == 0) return 0.0;
  const double mean = values.mean();
  return (values.array() - mean).square().sum() / static_cast<double>(values.size());
}

/// Lower bound applied to every fitted variance.
inline double variance_floor(const MatrixXd& values) { return std::max(1e-10, 1e-8 * pooled_variance(values)); }

/// Solve a small symmetric positive semi-definite system. The system is
/// first scaled to unit diagonal; when the scaled matrix is near-singular
/// (condition number above 1e12) a ridge of `ridge_scale * trace / dim` of
/// the scaled matrix is added to its diagonal.
inline VectorXd solve_spd_with_ridge(const MatrixXd& gram, const VectorXd& rhs, double ridge_scale) {
  const Index d = gram.rows();
  VectorXd scale(d);
  for (Index i = 0; i < d; ++i) scale[i] = gram(i, i) > 0.0 ? 1.0 / std::sqrt(gram(i, i)) : 1.0;
  MatrixXd a = scale.asDiagonal() * gram * scale.asDiagonal();
  Eigen::SelfAdjointEigenSolver<MatrixXd> eig(a, Eigen::EigenvaluesOnly);
  const double lo = eig.eigenvalues().minCoeff();
  const double hi = eig.eigenvalues().maxCoeff();
  if (!(hi > 0.0) || !(lo > 0.0) || hi / lo > 1e12) {
    const double tr = a.trace();
    const double lambda = tr > 0.0 ? ridge_scale * tr / static_cast<double>(d) : ridge_scale;
    a.diagonal().array() += lambda;
  }
  Eigen::LDLT<MatrixXd> ldlt(a);
  VectorXd x = scale.asDiagonal() * ldlt.solve(scale.asDiagonal() * rhs);
  if (ldlt.info() != Eigen::Success || !x.allFinite())
    throw NumericalError("weighted least-squares solve failed");
  return x;
}

}  // namespace regimix
