#pragma once

// Mixture of regressions with hidden logistic processes (MixRHLP).
//
// Each of the K clusters of a class is an RHLP model: at time t_j a curve
// value is drawn from one of R polynomial regimes, the regime being chosen
// with the logistic probabilities pi_r(t_j; w). Fitting alternates the
// posterior computation (cluster responsibilities gamma and regime
// responsibilities tau) with closed-form updates of the proportions,
// coefficients and variances plus an IRLS update of the logistic weights.
// Every density is accumulated in log domain.

#include <regimix/core.hpp>
#include <regimix/em_common.hpp>
#include <regimix/logistic_process.hpp>
#include <regimix/parallel.hpp>

#include <vector>

namespace regimix {

struct RhlpParams {
  LogisticWeights logistic;
  MatrixXd betas;      // d x R, column r is the coefficient vector of regime r
  VectorXd variances;  // R

  Index regimes() const { return variances.size(); }
};

struct MixRhlpParams {
  VectorXd alphas;  // K
  std::vector<RhlpParams> clusters;

  Index clusters_count() const { return alphas.size(); }
  std::vector<int> regimes() const {
    std::vector<int> r;
    for (const auto& c : clusters) r.push_back(static_cast<int>(c.regimes()));
    return r;
  }

  void validate(Index design_cols) const {
    if (alphas.size() < 1 || static_cast<Index>(clusters.size()) != alphas.size())
      throw ConfigError("mixture needs K >= 1 clusters with one proportion each");
    if ((alphas.array() <= 0.0).any() || std::abs(alphas.sum() - 1.0) > 1e-10)
      throw NumericalError("mixing proportions must be positive and sum to 1");
    for (const auto& c : clusters) {
      if (c.logistic.regimes() != c.regimes() || c.betas.cols() != c.regimes())
        throw ConfigError("inconsistent regime count inside a cluster");
      if (c.betas.rows() != design_cols) throw DataError("coefficient length does not match the design");
      if ((c.variances.array() <= 0.0).any() || !c.betas.allFinite())
        throw NumericalError("invalid regime coefficients or variances");
    }
  }
};

/// E-step output for a set of n curves.
struct Posteriors {
  MatrixXd gamma;                           // n x K
  std::vector<std::vector<MatrixXd>> taus;  // taus[k][i] is m x R_k
  VectorXd curve_loglik;                    // log p(x_i; Psi)
  MatrixXd cluster_loglik;                  // n x K, log p(x_i | z_i = k)
  double loglik = 0.0;                      // sum of curve_loglik

  double tau(Index i, Index k, Index j, Index r) const {
    return taus[static_cast<std::size_t>(k)][static_cast<std::size_t>(i)](j, r);
  }
};

namespace detail {

/// m x R table of log pi_r(t_j) + log N(x_j; beta_r' t_j, sigma_r^2) for one curve.
struct RhlpTerms {
  MatrixXd log_pi;  // m x R
  MatrixXd means;   // m x R
  VectorXd log_norm;
  VectorXd inv_var;

  RhlpTerms(const RhlpParams& c, const TimeGrid& grid, const DesignMatrix& design)
      : log_pi(log_regime_probabilities(c.logistic, grid)),
        means(design.entries * c.betas),
        log_norm(-0.5 * (kLog2Pi + c.variances.array().log())),
        inv_var(c.variances.cwiseInverse()) {}

  /// Fills `a` (m x R) and returns sum_j logsumexp_r a(j, r); when `tau` is
  /// given it receives the normalized regime posteriors.
  double evaluate(const CurveView& x, MatrixXd& a, MatrixXd* tau) const {
    const Index m = log_pi.rows(), R = log_pi.cols();
    a.resize(m, R);
    double total = 0.0;
    for (Index j = 0; j < m; ++j) {
      double mx = kNegInf;
      for (Index r = 0; r < R; ++r) {
        const double res = x[j] - means(j, r);
        a(j, r) = log_pi(j, r) + log_norm[r] - 0.5 * res * res * inv_var[r];
        mx = std::max(mx, a(j, r));
      }
      if (!std::isfinite(mx)) {
        total = kNegInf;
        if (tau) tau->row(j).setConstant(1.0 / static_cast<double>(R));
        continue;
      }
      double s = 0.0;
      for (Index r = 0; r < R; ++r) s += std::exp(a(j, r) - mx);
      const double lse = mx + std::log(s);
      total += lse;
      if (tau)
        for (Index r = 0; r < R; ++r) (*tau)(j, r) = std::exp(a(j, r) - lse);
    }
    return total;
  }
};

inline void check_design(const DesignMatrix& design, Index m) {
  if (design.rows() != m) throw DataError("design matrix rows do not match the curve length");
}

}  // namespace detail

/// log p(x | one RHLP cluster).
inline double rhlp_curve_loglik(const RhlpParams& params, const CurveView& curve, const TimeGrid& grid,
                                const DesignMatrix& design) {
  detail::check_design(design, curve.size());
  if (grid.size() != curve.size()) throw DataError("curve length does not match grid length");
  if (params.betas.rows() != design.cols()) throw DataError("coefficient length does not match the design");
  MatrixXd a;
  return detail::RhlpTerms(params, grid, design).evaluate(curve, a, nullptr);
}

inline double rhlp_curve_loglik(const RhlpParams& params, const Curve& curve, const DesignMatrix& design) {
  return rhlp_curve_loglik(params, curve.values(), curve.grid(), design);
}

/// log p(x | class mixture) = logsumexp_k (log alpha_k + log p(x | cluster k)).
inline double mixrhlp_curve_loglik(const MixRhlpParams& params, const CurveView& curve, const TimeGrid& grid,
                                   const DesignMatrix& design) {
  std::vector<double> terms;
  terms.reserve(params.clusters.size());
  for (Index k = 0; k < params.clusters_count(); ++k)
    terms.push_back(std::log(params.alphas[k]) +
                    rhlp_curve_loglik(params.clusters[static_cast<std::size_t>(k)], curve, grid, design));
  return logsumexp(std::span<const double>(terms));
}

inline double mixrhlp_curve_loglik(const MixRhlpParams& params, const Curve& curve, const DesignMatrix& design) {
  return mixrhlp_curve_loglik(params, curve.values(), curve.grid(), design);
}

/// Cluster responsibilities gamma and regime responsibilities tau.
inline Posteriors e_step(const MixRhlpParams& params, const CurveSet& data, const DesignMatrix& design) {
  detail::check_design(design, data.m());
  const Index n = data.n(), m = data.m(), K = params.clusters_count();
  Posteriors post;
  post.gamma.resize(n, K);
  post.cluster_loglik.resize(n, K);
  post.curve_loglik.resize(n);
  post.taus.resize(static_cast<std::size_t>(K));

  MatrixXd a;
  for (Index k = 0; k < K; ++k) {
    const RhlpParams& c = params.clusters[static_cast<std::size_t>(k)];
    if (c.betas.rows() != design.cols()) throw DataError("coefficient length does not match the design");
    const detail::RhlpTerms terms(c, data.grid(), design);
    auto& tk = post.taus[static_cast<std::size_t>(k)];
    tk.assign(static_cast<std::size_t>(n), MatrixXd(m, c.regimes()));
    for (Index i = 0; i < n; ++i)
      post.cluster_loglik(i, k) = terms.evaluate(data.curve(i), a, &tk[static_cast<std::size_t>(i)]);
  }

  const VectorXd log_alpha = params.alphas.array().log();
  post.loglik = 0.0;
  for (Index i = 0; i < n; ++i) {
    const Eigen::RowVectorXd lk = post.cluster_loglik.row(i) + log_alpha.transpose();
    const double lse = logsumexp(lk);
    if (!std::isfinite(lse)) throw NumericalError("curve has zero likelihood under every cluster");
    post.curve_loglik[i] = lse;
    post.gamma.row(i) = (lk.array() - lse).exp();
    post.gamma.row(i) /= post.gamma.row(i).sum();
    post.loglik += lse;
  }
  return post;
}

namespace detail {

/// Initial RHLP parameters for a group of curves: R contiguous uniform time
/// segments, each fitted by least squares, and logistic weights whose
/// softmax switches from regime r to r+1 at the r-th segment boundary.
inline RhlpParams segment_init(const CurveSet& data, const std::vector<Index>& curves, const DesignMatrix& design,
                               int R, double slope_scale, double var_floor) {
  const Index m = data.m();
  if (R < 1) throw ConfigError("number of regimes must be >= 1");
  if (R > m) throw ConfigError("more regimes than grid points");
  const TimeGrid& grid = data.grid();
  RhlpParams c{LogisticWeights(R), MatrixXd(design.cols(), R), VectorXd(R)};
  for (int r = 0; r < R; ++r) {
    const Index b = m * r / R, e = m * (r + 1) / R;
    const LeastSquaresFit fit = segment_least_squares(data, curves, design, b, e, var_floor);
    c.betas.col(r) = fit.beta;
    c.variances[r] = fit.variance;
  }
  if (R > 1) {
    const double span = grid.back() - grid.front();
    const double s = slope_scale * R / span;
    MatrixXd rows(R, 2);
    double acc = 0.0;
    for (int r = 0; r < R; ++r) {
      if (r > 0) acc += grid.front() + span * r / R;
      rows(r, 0) = -s * acc;
      rows(r, 1) = s * r;
    }
    c.logistic = LogisticWeights(rows);
  }
  return c;
}

}  // namespace detail

/// Starting point of one EM run: a seeded random partition of the curves,
/// then the segment initialization inside each group.
inline MixRhlpParams initialize_mixrhlp(const CurveSet& data, const DesignMatrix& design,
                                        const std::vector<int>& regimes, CounterRng& rng, double slope_scale) {
  const int K = static_cast<int>(regimes.size());
  const std::vector<int> group = random_partition(data, K, rng);
  const auto members = group_members(group, K);
  const double floor = variance_floor(data.values());
  MixRhlpParams p;
  p.alphas.resize(K);
  for (int k = 0; k < K; ++k) {
    const auto& mk = members[static_cast<std::size_t>(k)];
    p.alphas[k] = static_cast<double>(mk.size()) / static_cast<double>(data.n());
    p.clusters.push_back(
        detail::segment_init(data, mk, design, regimes[static_cast<std::size_t>(k)], slope_scale, floor));
  }
  return p;
}

/// Closed-form updates for proportions, coefficients and variances, and an
/// IRLS update of each cluster's logistic weights seeded at `prev`.
/// A cluster whose total responsibility drops below 1e-10 * n is restarted
/// from the curve with the lowest current log-likelihood.
inline MixRhlpParams m_step(const Posteriors& post, const CurveSet& data, const DesignMatrix& design,
                            const MixRhlpParams& prev, const EmOptions& opt = {}) {
  detail::check_design(design, data.m());
  const Index n = data.n(), m = data.m(), K = prev.clusters_count();
  if (post.gamma.rows() != n || post.gamma.cols() != K) throw DataError("posteriors do not match the data");
  const double floor = variance_floor(data.values());
  const MatrixXd& x = data.values();
  const MatrixXd& t = design.entries;

  MixRhlpParams next = prev;
  for (Index k = 0; k < K; ++k) next.alphas[k] = post.gamma.col(k).sum() / static_cast<double>(n);

  for (Index k = 0; k < K; ++k) {
    const RhlpParams& old = prev.clusters[static_cast<std::size_t>(k)];
    RhlpParams& c = next.clusters[static_cast<std::size_t>(k)];
    const Index R = old.regimes();
    const auto& tk = post.taus[static_cast<std::size_t>(k)];

    MatrixXd totals = MatrixXd::Zero(m, R);  // sum_i gamma_ik tau_ijkr
    MatrixXd wx = MatrixXd::Zero(m, R);      // sum_i gamma_ik tau_ijkr x_ij
    for (Index i = 0; i < n; ++i) {
      const double g = post.gamma(i, k);
      if (g == 0.0) continue;
      const MatrixXd& ti = tk[static_cast<std::size_t>(i)];
      for (Index j = 0; j < m; ++j)
        for (Index r = 0; r < R; ++r) {
          const double w = g * ti(j, r);
          totals(j, r) += w;
          wx(j, r) += w * x(i, j);
        }
    }

    for (Index r = 0; r < R; ++r) {
      const double mass = totals.col(r).sum();
      if (!(mass > 0.0)) continue;  // regime carries no weight: keep previous values
      const MatrixXd gram = t.transpose() * totals.col(r).asDiagonal() * t;
      const VectorXd rhs = t.transpose() * wx.col(r);
      c.betas.col(r) = solve_spd_with_ridge(gram, rhs, 1e-10);
      const VectorXd mu = t * c.betas.col(r);
      double ss = 0.0;
      for (Index i = 0; i < n; ++i) {
        const double g = post.gamma(i, k);
        if (g == 0.0) continue;
        const MatrixXd& ti = tk[static_cast<std::size_t>(i)];
        for (Index j = 0; j < m; ++j) {
          const double res = x(i, j) - mu[j];
          ss += g * ti(j, r) * res * res;
        }
      }
      c.variances[r] = std::max(floor, ss / mass);
    }
    c.logistic = irls_fit(old.logistic, data.grid(), totals, IrlsOptions{opt.irls_max_iter, opt.irls_tol, 30}).weights;
  }

  // Empty-cluster rescue.
  bool rescued = false;
  for (Index k = 0; k < K; ++k) {
    if (post.gamma.col(k).sum() >= 1e-10 * static_cast<double>(n)) continue;
    Index worst = 0;
    post.curve_loglik.minCoeff(&worst);
    next.clusters[static_cast<std::size_t>(k)] =
        detail::segment_init(data, {worst}, design, static_cast<int>(prev.clusters[static_cast<std::size_t>(k)].regimes()),
                             opt.init_slope_scale, floor);
    next.alphas[k] = std::max(next.alphas[k], 1e-12);
    rescued = true;
  }
  if (rescued) next.alphas /= next.alphas.sum();
  return next;
}

/// EM from a given starting point. The trace holds L at the start and after
/// each iteration; the loop stops when the increment falls below opt.tol or
/// after opt.max_iter iterations.
inline EmRun<MixRhlpParams> em_run(const CurveSet& data, const DesignMatrix& design, MixRhlpParams init,
                                   const EmOptions& opt) {
  check_em_options(opt);
  init.validate(design.cols());
  EmRun<MixRhlpParams> run{std::move(init), {}, 0, false};
  Posteriors post = e_step(run.params, data, design);
  run.trace.push_back(post.loglik);
  for (int q = 0; q < opt.max_iter; ++q) {
    MixRhlpParams next = m_step(post, data, design, run.params, opt);
    Posteriors next_post = e_step(next, data, design);
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

/// Number of free parameters: (K - 1) + sum_k ((p + 4) R_k - 2).
inline int free_parameter_count(const std::vector<int>& regimes, int p) {
  int nu = static_cast<int>(regimes.size()) - 1;
  for (int r : regimes) nu += (p + 4) * r - 2;
  return nu;
}

inline int free_parameter_count(const MixRhlpParams& params, int p) {
  return free_parameter_count(params.regimes(), p);
}

inline double bic(const MixRhlpParams& params, double loglik, Index n, int p) {
  return loglik - 0.5 * free_parameter_count(params, p) * std::log(static_cast<double>(n));
}

struct MixRhlpConfig {
  int K = 1;
  std::vector<int> R{1};  // one entry per cluster, or a single entry used for all
  int p = 0;
  EmOptions em;

  std::vector<int> regimes_per_cluster() const {
    if (R.size() == 1) return std::vector<int>(static_cast<std::size_t>(K), R[0]);
    if (static_cast<int>(R.size()) != K) throw ConfigError("R must have one entry or one per cluster");
    return R;
  }
};

struct MixRhlpFit {
  MixRhlpParams params;
  FitReport report;
};

/// Best of n_restarts EM runs (highest final log-likelihood, then lowest
/// restart index). Restart r is initialized from the sub-seed (seed, r).
inline MixRhlpFit em_fit(const CurveSet& data, const MixRhlpConfig& cfg) {
  check_em_options(cfg.em);
  if (cfg.K < 1) throw ConfigError("K must be >= 1");
  if (data.n() < cfg.K) throw ConfigError("fewer curves than clusters");
  const std::vector<int> regimes = cfg.regimes_per_cluster();
  const DesignMatrix design = vandermonde(data.grid(), cfg.p);

  std::vector<EmRun<MixRhlpParams>> runs(static_cast<std::size_t>(cfg.em.n_restarts));
  parallel_for(runs.size(), [&](std::size_t r) {
    CounterRng rng(derive_seed(cfg.em.seed, {static_cast<std::uint64_t>(r)}));
    runs[r] = em_run(data, design, initialize_mixrhlp(data, design, regimes, rng, cfg.em.init_slope_scale), cfg.em);
  });

  std::size_t best = 0;
  for (std::size_t r = 1; r < runs.size(); ++r)
    if (runs[r].trace.back() > runs[best].trace.back()) best = r;

  MixRhlpFit fit{runs[best].params, {}};
  fit.report.loglik_trace = runs[best].trace;
  fit.report.iterations = runs[best].iterations;
  fit.report.converged = runs[best].converged;
  fit.report.restarts_tried = cfg.em.n_restarts;
  fit.report.best_restart = static_cast<int>(best);
  for (auto& r : runs) fit.report.restart_traces.push_back(std::move(r.trace));
  fit.report.bic = bic(fit.params, fit.report.final_loglik(), data.n(), cfg.p);
  return fit;
}

/// Mean curve of one cluster: sum_r pi_r(t_j) beta_r' t_j.
inline VectorXd mean_curve(const RhlpParams& c, const TimeGrid& grid, const DesignMatrix& design) {
  return (regime_probabilities(c.logistic, grid).array() * (design.entries * c.betas).array()).rowwise().sum();
}

/// One mean curve per cluster, as rows of a K x m matrix.
inline MatrixXd mean_curves(const MixRhlpParams& params, const TimeGrid& grid, const DesignMatrix& design) {
  detail::check_design(design, grid.size());
  MatrixXd out(params.clusters_count(), grid.size());
  for (Index k = 0; k < params.clusters_count(); ++k)
    out.row(k) = mean_curve(params.clusters[static_cast<std::size_t>(k)], grid, design).transpose();
  return out;
}

struct BicEntry {
  int K = 0;
  int R = 0;
  int nu = 0;
  double loglik = 0.0;
  double bic = 0.0;
};

struct ModelSelection {
  MixRhlpFit best;
  std::vector<BicEntry> table;  // in (K, R) grid order
  std::size_t best_index = 0;
};

/// Fits every (K, R) pair (same R in all clusters) and keeps the highest
/// BIC; ties go to fewer free parameters, then to smaller K.
inline ModelSelection select_model(const CurveSet& data, const std::vector<int>& K_range,
                                   const std::vector<int>& R_range, int p, const EmOptions& em) {
  if (K_range.empty() || R_range.empty()) throw ConfigError("empty K or R range");
  ModelSelection sel;
  bool have = false;
  for (int K : K_range)
    for (int R : R_range) {
      MixRhlpFit fit = em_fit(data, MixRhlpConfig{K, {R}, p, em});
      BicEntry e{K, R, free_parameter_count(fit.params, p), fit.report.final_loglik(), fit.report.bic};
      sel.table.push_back(e);
      bool better = !have;
      if (have) {
        const BicEntry& b = sel.table[sel.best_index];
        better = e.bic > b.bic || (e.bic == b.bic && (e.nu < b.nu || (e.nu == b.nu && e.K < b.K)));
      }
      if (better) {
        sel.best = std::move(fit);
        sel.best_index = sel.table.size() - 1;
        have = true;
      }
    }
  return sel;
}

}  // namespace regimix
