#pragma once

// Reference class densities: a single Gaussian regression model per class
// (polynomial or B-spline design), and the curve-level Gaussian regression
// mixture fitted by EM.

#include <regimix/core.hpp>
#include <regimix/em_common.hpp>
#include <regimix/parallel.hpp>

#include <vector>

namespace regimix {

struct SingleRegressionParams {
  VectorXd beta;
  double variance = 1.0;
};

struct RegressionMixtureParams {
  VectorXd alphas;
  std::vector<SingleRegressionParams> components;

  Index components_count() const { return alphas.size(); }
};

/// Ordinary least squares over every point of every curve.
inline SingleRegressionParams fit_single_regression(const CurveSet& data, const DesignMatrix& design) {
  if (design.rows() != data.m()) throw DataError("design matrix rows do not match the curve length");
  if (data.n() * data.m() < design.cols()) throw ConfigError("fewer observations than regression coefficients");
  std::vector<Index> all(static_cast<std::size_t>(data.n()));
  for (Index i = 0; i < data.n(); ++i) all[static_cast<std::size_t>(i)] = i;
  const LeastSquaresFit fit = segment_least_squares(data, all, design, 0, data.m(), variance_floor(data.values()));
  return {fit.beta, fit.variance};
}

inline double single_regression_curve_loglik(const SingleRegressionParams& params, const CurveView& curve,
                                             const DesignMatrix& design) {
  if (design.rows() != curve.size()) throw DataError("design matrix rows do not match the curve length");
  if (params.beta.size() != design.cols()) throw DataError("coefficient length does not match the design");
  if (!(params.variance > 0.0)) throw NumericalError("non-positive variance");
  const double ss = (curve - design.entries * params.beta).squaredNorm();
  return -0.5 * (static_cast<double>(curve.size()) * (kLog2Pi + std::log(params.variance)) + ss / params.variance);
}

inline double regression_mixture_curve_loglik(const RegressionMixtureParams& params, const CurveView& curve,
                                              const DesignMatrix& design) {
  std::vector<double> terms;
  for (Index k = 0; k < params.components_count(); ++k)
    terms.push_back(std::log(params.alphas[k]) +
                    single_regression_curve_loglik(params.components[static_cast<std::size_t>(k)], curve, design));
  return logsumexp(std::span<const double>(terms));
}

struct MixturePosteriors {
  MatrixXd gamma;            // n x K
  MatrixXd component_loglik; // n x K
  VectorXd curve_loglik;
  double loglik = 0.0;
};

inline MixturePosteriors regression_mixture_e_step(const RegressionMixtureParams& params, const CurveSet& data,
                                                   const DesignMatrix& design) {
  const Index n = data.n(), K = params.components_count();
  MixturePosteriors post{MatrixXd(n, K), MatrixXd(n, K), VectorXd(n), 0.0};
  for (Index k = 0; k < K; ++k)
    for (Index i = 0; i < n; ++i)
      post.component_loglik(i, k) =
          single_regression_curve_loglik(params.components[static_cast<std::size_t>(k)], data.curve(i), design);
  const VectorXd log_alpha = params.alphas.array().log();
  for (Index i = 0; i < n; ++i) {
    const Eigen::RowVectorXd lk = post.component_loglik.row(i) + log_alpha.transpose();
    const double lse = logsumexp(lk);
    if (!std::isfinite(lse)) throw NumericalError("curve has zero likelihood under every component");
    post.curve_loglik[i] = lse;
    post.gamma.row(i) = (lk.array() - lse).exp();
    post.gamma.row(i) /= post.gamma.row(i).sum();
    post.loglik += lse;
  }
  return post;
}

/// Proportions, responsibility-weighted least squares and weighted residual
/// variance per component. Empty components are restarted from the
/// worst-fitted curve, as in the MixRHLP M-step.
inline RegressionMixtureParams regression_mixture_m_step(const MixturePosteriors& post, const CurveSet& data,
                                                         const DesignMatrix& design,
                                                         const RegressionMixtureParams& prev) {
  const Index n = data.n(), m = data.m(), K = prev.components_count();
  const double floor = variance_floor(data.values());
  const MatrixXd& t = design.entries;
  RegressionMixtureParams next = prev;
  for (Index k = 0; k < K; ++k) {
    const double mass = post.gamma.col(k).sum();
    next.alphas[k] = mass / static_cast<double>(n);
    if (!(mass > 0.0)) continue;
    const VectorXd totals = VectorXd::Constant(m, mass);
    const VectorXd wx = data.values().transpose() * post.gamma.col(k);  // sum_i gamma_ik x_ij
    const MatrixXd gram = t.transpose() * totals.asDiagonal() * t;
    auto& c = next.components[static_cast<std::size_t>(k)];
    c.beta = solve_spd_with_ridge(gram, t.transpose() * wx, 1e-10);
    const VectorXd mu = t * c.beta;
    double ss = 0.0;
    for (Index i = 0; i < n; ++i) {
      const double g = post.gamma(i, k);
      if (g == 0.0) continue;
      ss += g * (data.curve(i) - mu).squaredNorm();
    }
    c.variance = std::max(floor, ss / (mass * static_cast<double>(m)));
  }

  bool rescued = false;
  for (Index k = 0; k < K; ++k) {
    if (post.gamma.col(k).sum() >= 1e-10 * static_cast<double>(n)) continue;
    Index worst = 0;
    post.curve_loglik.minCoeff(&worst);
    const LeastSquaresFit fit = segment_least_squares(data, {worst}, design, 0, m, floor);
    next.components[static_cast<std::size_t>(k)] = {fit.beta, fit.variance};
    next.alphas[k] = std::max(next.alphas[k], 1e-12);
    rescued = true;
  }
  if (rescued) next.alphas /= next.alphas.sum();
  return next;
}

/// Seeded partition followed by least squares inside each group.
inline RegressionMixtureParams initialize_regression_mixture(const CurveSet& data, const DesignMatrix& design, int K,
                                                             CounterRng& rng) {
  const std::vector<int> group = random_partition(data, K, rng);
  const auto members = group_members(group, K);
  const double floor = variance_floor(data.values());
  RegressionMixtureParams p;
  p.alphas.resize(K);
  for (int k = 0; k < K; ++k) {
    const auto& mk = members[static_cast<std::size_t>(k)];
    p.alphas[k] = static_cast<double>(mk.size()) / static_cast<double>(data.n());
    const LeastSquaresFit fit = segment_least_squares(data, mk, design, 0, data.m(), floor);
    p.components.push_back({fit.beta, fit.variance});
  }
  return p;
}

inline EmRun<RegressionMixtureParams> regression_mixture_em_run(const CurveSet& data, const DesignMatrix& design,
                                                                RegressionMixtureParams init, const EmOptions& opt) {
  check_em_options(opt);
  if (design.rows() != data.m()) throw DataError("design matrix rows do not match the curve length");
  EmRun<RegressionMixtureParams> run{std::move(init), {}, 0, false};
  MixturePosteriors post = regression_mixture_e_step(run.params, data, design);
  run.trace.push_back(post.loglik);
  for (int q = 0; q < opt.max_iter; ++q) {
    RegressionMixtureParams next = regression_mixture_m_step(post, data, design, run.params);
    MixturePosteriors next_post = regression_mixture_e_step(next, data, design);
    const double inc = next_post.loglik - post.loglik;
    run.params = std::move(next);
    post = std::move(next_post);
    run.trace.push_back(post.loglik);
    ++run.iterations;
    if (inc < opt.tol) {
      run.converged = true;
      break;
    }
  }
  return run;
}

struct RegressionMixtureFit {
  RegressionMixtureParams params;
  FitReport report;
};

/// Best of n_restarts runs; restart r draws its partition from sub-seed (seed, r).
inline RegressionMixtureFit fit_regression_mixture(const CurveSet& data, const DesignMatrix& design, int K,
                                                   const EmOptions& opt) {
  check_em_options(opt);
  if (K < 1) throw ConfigError("K must be >= 1");
  if (data.n() < K) throw ConfigError("fewer curves than clusters");
  std::vector<EmRun<RegressionMixtureParams>> runs(static_cast<std::size_t>(opt.n_restarts));
  parallel_for(runs.size(), [&](std::size_t r) {
    CounterRng rng(derive_seed(opt.seed, {static_cast<std::uint64_t>(r)}));
    runs[r] = regression_mixture_em_run(data, design, initialize_regression_mixture(data, design, K, rng), opt);
  });
  std::size_t best = 0;
  for (std::size_t r = 1; r < runs.size(); ++r)
    if (runs[r].trace.back() > runs[best].trace.back()) best = r;

  RegressionMixtureFit fit{runs[best].params, {}};
  fit.report.loglik_trace = runs[best].trace;
  fit.report.iterations = runs[best].iterations;
  fit.report.converged = runs[best].converged;
  fit.report.restarts_tried = opt.n_restarts;
  fit.report.best_restart = static_cast<int>(best);
  for (auto& r : runs) fit.report.restart_traces.push_back(std::move(r.trace));
  // (K - 1) proportions, K coefficient vectors and K variances.
  const double nu = static_cast<double>(K - 1 + K * (design.cols() + 1));
  fit.report.bic = fit.report.final_loglik() - 0.5 * nu * std::log(static_cast<double>(data.n()));
  return fit;
}

/// Component mean curves (design * beta_k) as rows of a K x m matrix.
inline MatrixXd regression_mixture_mean_curves(const RegressionMixtureParams& params, const DesignMatrix& design) {
  MatrixXd out(params.components_count(), design.rows());
  for (Index k = 0; k < params.components_count(); ++k)
    out.row(k) = (design.entries * params.components[static_cast<std::size_t>(k)].beta).transpose();
  return out;
}

}  // namespace regimix
