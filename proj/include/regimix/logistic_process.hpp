#pragma once

// Hidden logistic process: time-varying regime probabilities given by a
// softmax over linear scores w_r0 + w_r1 t, and the weighted multinomial
// logistic fit (Newton-Raphson / IRLS) used in the M-step.

#include <regimix/core.hpp>

#include <vector>

namespace regimix {

/// R x 2 matrix of (intercept, slope) rows. The last row is the reference
/// component and is always (0, 0); only the first R-1 rows are free.
class LogisticWeights {
 public:
  LogisticWeights() : LogisticWeights(1) {}
  explicit LogisticWeights(Index regimes) : rows_(MatrixXd::Zero(regimes, 2)) {
    if (regimes < 1) throw ConfigError("logistic process needs at least one component");
  }
  /// Any R x 2 matrix; it is gauge-fixed by subtracting its last row, which
  /// leaves the probabilities unchanged.
  explicit LogisticWeights(MatrixXd rows) : rows_(std::move(rows)) {
    if (rows_.rows() < 1 || rows_.cols() != 2) throw ConfigError("logistic weights must be R x 2 with R >= 1");
    if (!rows_.allFinite()) throw NumericalError("non-finite logistic weights");
    const Eigen::RowVector2d ref = rows_.row(rows_.rows() - 1);
    rows_.rowwise() -= ref;
  }

  Index regimes() const { return rows_.rows(); }
  Index free_size() const { return 2 * (rows_.rows() - 1); }
  const MatrixXd& rows() const { return rows_; }
  double intercept(Index r) const { return rows_(r, 0); }
  double slope(Index r) const { return rows_(r, 1); }

  /// Free parameters, ordered (w_00, w_01, w_10, w_11, ...).
  VectorXd free() const {
    VectorXd v(free_size());
    for (Index r = 0; r + 1 < regimes(); ++r) v.segment<2>(2 * r) = rows_.row(r).transpose();
    return v;
  }

  LogisticWeights with_free(const VectorXd& v) const {
    LogisticWeights out(*this);
    for (Index r = 0; r + 1 < regimes(); ++r) out.rows_.row(r) = v.segment<2>(2 * r).transpose();
    return out;
  }

 private:
  MatrixXd rows_;
};

/// Combined E-step weights gamma_ik * tau_ijkr for one cluster, n x m x R.
class RegimeWeightTable {
 public:
  RegimeWeightTable(Index n, Index m, Index regimes)
      : n_(n), m_(m), r_(regimes), data_(static_cast<std::size_t>(n * m * regimes), 0.0) {}

  Index n() const { return n_; }
  Index m() const { return m_; }
  Index regimes() const { return r_; }
  double& operator()(Index i, Index j, Index r) { return data_[static_cast<std::size_t>((i * m_ + j) * r_ + r)]; }
  double operator()(Index i, Index j, Index r) const {
    return data_[static_cast<std::size_t>((i * m_ + j) * r_ + r)];
  }

  /// Sum over curves: the logistic objective only depends on t_j, so the
  /// m x R totals are a sufficient statistic.
  MatrixXd totals() const {
    MatrixXd t = MatrixXd::Zero(m_, r_);
    for (Index i = 0; i < n_; ++i)
      for (Index j = 0; j < m_; ++j)
        for (Index r = 0; r < r_; ++r) t(j, r) += (*this)(i, j, r);
    return t;
  }

 private:
  Index n_, m_, r_;
  std::vector<double> data_;
};

/// m x R matrix of log pi_r(t_j).
inline MatrixXd log_regime_probabilities(const LogisticWeights& w, const TimeGrid& grid) {
  const Index m = grid.size(), R = w.regimes();
  MatrixXd lp(m, R);
  for (Index j = 0; j < m; ++j) {
    for (Index r = 0; r < R; ++r) lp(j, r) = w.intercept(r) + w.slope(r) * grid[j];
    const double lse = logsumexp(lp.row(j));
    lp.row(j).array() -= lse;
  }
  return lp;
}

/// m x R matrix of pi_r(t_j); each row sums to one.
inline MatrixXd regime_probabilities(const LogisticWeights& w, const TimeGrid& grid) {
  const Index m = grid.size(), R = w.regimes();
  MatrixXd p(m, R);
  for (Index j = 0; j < m; ++j) {
    double mx = kNegInf;
    for (Index r = 0; r < R; ++r) {
      p(j, r) = w.intercept(r) + w.slope(r) * grid[j];
      mx = std::max(mx, p(j, r));
    }
    p.row(j) = (p.row(j).array() - mx).exp();
    p.row(j) /= p.row(j).sum();
  }
  return p;
}

/// Q_w = sum_j sum_r totals(j, r) log pi_r(t_j).
inline double logistic_objective(const LogisticWeights& w, const TimeGrid& grid, const MatrixXd& totals) {
  const MatrixXd lp = log_regime_probabilities(w, grid);
  double q = 0.0;
  for (Index j = 0; j < lp.rows(); ++j)
    for (Index r = 0; r < lp.cols(); ++r)
      if (totals(j, r) != 0.0) q += totals(j, r) * lp(j, r);
  return q;
}

inline double logistic_objective(const LogisticWeights& w, const TimeGrid& grid, const RegimeWeightTable& counts) {
  return logistic_objective(w, grid, counts.totals());
}

struct GradientHessian {
  VectorXd gradient;  // 2(R-1)
  MatrixXd hessian;   // 2(R-1) x 2(R-1), negative semi-definite
};

/// Derivatives of Q_w with respect to the free weights, from m x R totals.
inline GradientHessian qw_gradient_hessian(const LogisticWeights& w, const TimeGrid& grid, const MatrixXd& totals) {
  const Index R = w.regimes(), dim = w.free_size();
  if (totals.rows() != grid.size() || totals.cols() != R)
    throw DataError("regime weight table does not match grid and regime count");
  GradientHessian out{VectorXd::Zero(dim), MatrixXd::Zero(dim, dim)};
  if (dim == 0) return out;
  const MatrixXd p = regime_probabilities(w, grid);
  for (Index j = 0; j < grid.size(); ++j) {
    const double wj = totals.row(j).sum();
    const Eigen::Vector2d phi(1.0, grid[j]);
    const Eigen::Matrix2d outer = phi * phi.transpose();
    for (Index r = 0; r + 1 < R; ++r) {
      out.gradient.segment<2>(2 * r) += (totals(j, r) - wj * p(j, r)) * phi;
      for (Index s = 0; s + 1 < R; ++s) {
        const double c = wj * p(j, r) * ((r == s ? 1.0 : 0.0) - p(j, s));
        out.hessian.block<2, 2>(2 * r, 2 * s) -= c * outer;
      }
    }
  }
  return out;
}

inline GradientHessian qw_gradient_hessian(const LogisticWeights& w, const TimeGrid& grid,
                                           const RegimeWeightTable& counts) {
  if (counts.m() != grid.size() || counts.regimes() != w.regimes())
    throw DataError("regime weight table does not match grid and regime count");
  return qw_gradient_hessian(w, grid, counts.totals());
}

struct IrlsOptions {
  int max_iter = 50;
  double tol = 1e-8;       // stop when |dQ| < tol * (1 + |Q|)
  int max_halvings = 30;
};

struct IrlsResult {
  LogisticWeights weights;
  std::vector<double> objective_trace;  // Q_w at the start and after each accepted step
  int iterations = 0;
  bool converged = false;
};

/// Newton-Raphson ascent on Q_w with step halving. Only improving steps are
/// accepted, so the objective trace is non-decreasing. When the negated
/// Hessian is badly conditioned after unit-diagonal scaling, a ridge of
/// 1e-8 * trace / dim of the scaled matrix is added before solving.
inline IrlsResult irls_fit(const LogisticWeights& init, const TimeGrid& grid, const MatrixXd& totals,
                           const IrlsOptions& opt = {}) {
  if (totals.rows() != grid.size() || totals.cols() != init.regimes())
    throw DataError("regime weight table does not match grid and regime count");
  IrlsResult res{init, {}, 0, false};
  double q = logistic_objective(init, grid, totals);
  res.objective_trace.push_back(q);
  if (init.regimes() == 1) {
    res.converged = true;
    return res;
  }

  for (int it = 0; it < opt.max_iter; ++it) {
    const GradientHessian gh = qw_gradient_hessian(res.weights, grid, totals);
    if (gh.gradient.lpNorm<Eigen::Infinity>() == 0.0) {
      res.converged = true;
      break;
    }
    const MatrixXd neg_h = -gh.hessian;
    VectorXd step = solve_spd_with_ridge(neg_h, gh.gradient, 1e-8);

    const VectorXd base = res.weights.free();
    double scale = 1.0;
    bool accepted = false;
    LogisticWeights candidate = res.weights;
    double q_new = q;
    for (int h = 0; h <= opt.max_halvings; ++h, scale *= 0.5) {
      const VectorXd trial = base + scale * step;
      if (!trial.allFinite()) continue;
      candidate = res.weights.with_free(trial);
      q_new = logistic_objective(candidate, grid, totals);
      if (q_new >= q) {
        accepted = true;
        break;
      }
    }
    if (!accepted) {
      res.converged = true;  // no ascent direction left at working precision
      break;
    }
    const double dq = q_new - q;
    res.weights = candidate;
    q = q_new;
    res.objective_trace.push_back(q);
    ++res.iterations;
    if (std::abs(dq) < opt.tol * (1.0 + std::abs(q))) {
      res.converged = true;
      break;
    }
  }
  return res;
}

inline IrlsResult irls_fit(const LogisticWeights& init, const TimeGrid& grid, const RegimeWeightTable& counts,
                           int max_iter, double tol) {
  if (counts.m() != grid.size() || counts.regimes() != init.regimes())
    throw DataError("regime weight table does not match grid and regime count");
  return irls_fit(init, grid, counts.totals(), IrlsOptions{max_iter, tol, 30});
}

}  // namespace regimix
