#pragma once

// Pieces shared by the curve-level EM fitters: options, the fit report,
// the seeded initial partition, and small least-squares helpers.

#include <regimix/core.hpp>
#include <regimix/random.hpp>

#include <cstdint>
#include <limits>
#include <vector>

namespace regimix {

struct EmOptions {
  int max_iter = 1000;
  double tol = 1e-6;  // stop when the log-likelihood increment drops below this
  int n_restarts = 5;
  std::uint64_t seed = 0;
  int irls_max_iter = 50;
  double irls_tol = 1e-8;
  double init_slope_scale = 5.0;  // sharpness of the initial logistic segmentation
};

struct FitReport {
  std::vector<double> loglik_trace;  // L(Psi^(0)), then one value per EM iteration
  int iterations = 0;
  bool converged = false;
  double bic = std::numeric_limits<double>::quiet_NaN();
  int restarts_tried = 0;
  int best_restart = 0;
  std::vector<std::vector<double>> restart_traces;  // every restart, best included

  double final_loglik() const { return loglik_trace.empty() ? kNegInf : loglik_trace.back(); }
};

/// Result of one EM run from a given starting point.
template <typename Params>
struct EmRun {
  Params params;
  std::vector<double> trace;
  int iterations = 0;
  bool converged = false;
};

/// Random hard partition of the curves into K non-empty groups: K seed
/// curves are drawn with D^2 weighting (first one uniformly), then every
/// curve joins its nearest seed. Returns a group index per curve.
inline std::vector<int> random_partition(const CurveSet& data, int K, CounterRng& rng) {
  const Index n = data.n();
  if (K < 1) throw ConfigError("number of clusters must be >= 1");
  if (n < K) throw ConfigError("fewer curves (" + std::to_string(n) + ") than clusters (" + std::to_string(K) + ")");
  std::vector<int> group(static_cast<std::size_t>(n), 0);
  if (K == 1) return group;

  const MatrixXd& x = data.values();
  std::vector<Index> seeds;
  seeds.push_back(static_cast<Index>(rng.below(static_cast<std::uint64_t>(n))));
  VectorXd d2 = (x.rowwise() - x.row(seeds[0])).rowwise().squaredNorm();
  while (static_cast<int>(seeds.size()) < K) {
    const double total = d2.sum();
    Index pick = -1;
    if (total > 0.0) {
      const double u = rng.uniform() * total;
      double acc = 0.0;
      for (Index i = 0; i < n; ++i) {
        acc += d2[i];
        if (d2[i] > 0.0 && u < acc) {
          pick = i;
          break;
        }
      }
      if (pick < 0)
        for (Index i = n - 1; i >= 0; --i)
          if (d2[i] > 0.0) {
            pick = i;
            break;
          }
    }
    if (pick < 0) {  // remaining curves all coincide with a seed
      for (Index i = 0; i < n && pick < 0; ++i)
        if (std::find(seeds.begin(), seeds.end(), i) == seeds.end()) pick = i;
    }
    seeds.push_back(pick);
    d2 = d2.cwiseMin((x.rowwise() - x.row(pick)).rowwise().squaredNorm());
  }

  for (Index i = 0; i < n; ++i) {
    double best = std::numeric_limits<double>::infinity();
    for (int k = 0; k < K; ++k) {
      const double d = (x.row(i) - x.row(seeds[static_cast<std::size_t>(k)])).squaredNorm();
      if (d < best) {
        best = d;
        group[static_cast<std::size_t>(i)] = k;
      }
    }
  }
  for (int k = 0; k < K; ++k) group[static_cast<std::size_t>(seeds[static_cast<std::size_t>(k)])] = k;
  return group;
}

struct LeastSquaresFit {
  VectorXd beta;
  double variance;
};

/// Least squares over the selected curves and the grid rows [row_begin,
/// row_end); the variance is the mean squared residual, floored.
inline LeastSquaresFit segment_least_squares(const CurveSet& data, const std::vector<Index>& curves,
                                             const DesignMatrix& design, Index row_begin, Index row_end,
                                             double var_floor) {
  const Index d = design.cols();
  MatrixXd gram = MatrixXd::Zero(d, d);
  VectorXd rhs = VectorXd::Zero(d);
  for (Index j = row_begin; j < row_end; ++j) {
    const VectorXd phi = design.entries.row(j).transpose();
    double sx = 0.0;
    for (Index i : curves) sx += data.values()(i, j);
    gram.noalias() += static_cast<double>(curves.size()) * phi * phi.transpose();
    rhs.noalias() += sx * phi;
  }
  LeastSquaresFit fit{solve_spd_with_ridge(gram, rhs, 1e-10), 0.0};
  double ss = 0.0;
  const VectorXd mu = design.entries.middleRows(row_begin, row_end - row_begin) * fit.beta;
  for (Index i : curves)
    for (Index j = row_begin; j < row_end; ++j) {
      const double r = data.values()(i, j) - mu[j - row_begin];
      ss += r * r;
    }
  const double count = static_cast<double>(curves.size()) * static_cast<double>(row_end - row_begin);
  fit.variance = std::max(var_floor, count > 0.0 ? ss / count : var_floor);
  return fit;
}

/// Members of each group of a partition.
inline std::vector<std::vector<Index>> group_members(const std::vector<int>& group, int K) {
  std::vector<std::vector<Index>> members(static_cast<std::size_t>(K));
  for (std::size_t i = 0; i < group.size(); ++i)
    members[static_cast<std::size_t>(group[i])].push_back(static_cast<Index>(i));
  return members;
}

inline void check_em_options(const EmOptions& opt) {
  if (!(opt.tol > 0.0)) throw ConfigError("EM tolerance must be > 0");
  if (opt.max_iter < 0) throw ConfigError("max_iter must be >= 0");
  if (opt.n_restarts < 1) throw ConfigError("n_restarts must be >= 1");
}

}  // namespace regimix
