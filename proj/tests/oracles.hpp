#pragma once

// Reference computations used only by the tests. Everything here is written
// as plain loops in long double, straight from the model definitions, and
// shares no code with the library beyond its parameter types.

#include <regimix/regimix.hpp>

#include <cmath>
#include <numbers>
#include <vector>

namespace oracle {

using regimix::Index;
using ld = long double;
using LdMatrix = std::vector<std::vector<ld>>;

/// Cox-de Boor recursion for the i-th B-spline of the given order on a knot
/// vector; the last non-empty span is closed on the right.
inline ld bspline(const std::vector<double>& knots, int i, int order, ld t) {
  if (order == 1) {
    const ld a = knots[i], b = knots[i + 1];
    if (a == b) return 0;
    std::size_t last = knots.size() - 1;
    while (last > 0 && knots[last - 1] == knots[last]) --last;
    const bool right_end = static_cast<std::size_t>(i + 1) == last;
    return (t >= a && (t < b || (right_end && t == b))) ? 1 : 0;
  }
  ld v = 0;
  const ld d1 = static_cast<ld>(knots[i + order - 1]) - knots[i];
  const ld d2 = static_cast<ld>(knots[i + order]) - knots[i + 1];
  if (d1 > 0) v += (t - knots[i]) / d1 * bspline(knots, i, order - 1, t);
  if (d2 > 0) v += (static_cast<ld>(knots[i + order]) - t) / d2 * bspline(knots, i + 1, order - 1, t);
  return v;
}

inline ld normal_pdf(ld x, ld mean, ld var) {
  const ld r = x - mean;
  return std::exp(-r * r / (2 * var)) / std::sqrt(2 * std::numbers::pi_v<ld> * var);
}

/// pi_r(t) by direct softmax of (w_r0 + w_r1 t).
inline std::vector<ld> softmax_at(const regimix::LogisticWeights& w, ld t) {
  const Index R = w.regimes();
  std::vector<ld> e(static_cast<std::size_t>(R));
  ld s = 0;
  for (Index r = 0; r < R; ++r) {
    e[static_cast<std::size_t>(r)] = std::exp(static_cast<ld>(w.intercept(r)) + static_cast<ld>(w.slope(r)) * t);
    s += e[static_cast<std::size_t>(r)];
  }
  for (auto& v : e) v /= s;
  return e;
}

inline ld design_value(const regimix::DesignMatrix& d, Index j, Index c) { return d.entries(j, c); }

inline ld regime_mean(const regimix::RhlpParams& c, const regimix::DesignMatrix& d, Index j, Index r) {
  ld mu = 0;
  for (Index q = 0; q < d.cols(); ++q) mu += design_value(d, j, q) * static_cast<ld>(c.betas(q, r));
  return mu;
}

/// Linear-domain density of one curve under one RHLP component.
inline ld rhlp_density(const regimix::RhlpParams& c, const std::vector<double>& grid, const regimix::DesignMatrix& d,
                       const std::vector<double>& x) {
  ld prod = 1;
  for (std::size_t j = 0; j < grid.size(); ++j) {
    const auto pi = softmax_at(c.logistic, grid[j]);
    ld s = 0;
    for (Index r = 0; r < c.regimes(); ++r)
      s += pi[static_cast<std::size_t>(r)] *
           normal_pdf(x[j], regime_mean(c, d, static_cast<Index>(j), r), static_cast<ld>(c.variances[r]));
    prod *= s;
  }
  return prod;
}

inline ld mixrhlp_density(const regimix::MixRhlpParams& p, const std::vector<double>& grid,
                          const regimix::DesignMatrix& d, const std::vector<double>& x) {
  ld s = 0;
  for (Index k = 0; k < p.clusters_count(); ++k)
    s += static_cast<ld>(p.alphas[k]) * rhlp_density(p.clusters[static_cast<std::size_t>(k)], grid, d, x);
  return s;
}

struct BrutePosteriors {
  LdMatrix gamma;                          // n x K
  std::vector<std::vector<LdMatrix>> tau;  // [k][i] m x R
};

/// Cluster memberships alpha_k f_k(x_i) / sum_l alpha_l f_l(x_i), and regime
/// memberships pi_r(t_j) N(x_ij; .) / sum_s pi_s(t_j) N(x_ij; .).
inline BrutePosteriors posteriors(const regimix::MixRhlpParams& p, const std::vector<double>& grid,
                                  const regimix::DesignMatrix& d, const std::vector<std::vector<double>>& curves) {
  const std::size_t n = curves.size(), K = static_cast<std::size_t>(p.clusters_count()), m = grid.size();
  BrutePosteriors b;
  b.gamma.assign(n, std::vector<ld>(K));
  b.tau.assign(K, std::vector<LdMatrix>(n));
  for (std::size_t i = 0; i < n; ++i) {
    ld total = 0;
    for (std::size_t k = 0; k < K; ++k) {
      b.gamma[i][k] = static_cast<ld>(p.alphas[static_cast<Index>(k)]) * rhlp_density(p.clusters[k], grid, d, curves[i]);
      total += b.gamma[i][k];
    }
    for (auto& g : b.gamma[i]) g /= total;
    for (std::size_t k = 0; k < K; ++k) {
      const auto& c = p.clusters[k];
      const std::size_t R = static_cast<std::size_t>(c.regimes());
      b.tau[k][i].assign(m, std::vector<ld>(R));
      for (std::size_t j = 0; j < m; ++j) {
        const auto pi = softmax_at(c.logistic, grid[j]);
        ld s = 0;
        for (std::size_t r = 0; r < R; ++r) {
          b.tau[k][i][j][r] = pi[r] * normal_pdf(curves[i][j], regime_mean(c, d, static_cast<Index>(j), static_cast<Index>(r)),
                                                 static_cast<ld>(c.variances[static_cast<Index>(r)]));
          s += b.tau[k][i][j][r];
        }
        for (auto& v : b.tau[k][i][j]) v /= s;
      }
    }
  }
  return b;
}

/// Gaussian elimination with partial pivoting.
inline std::vector<ld> solve(LdMatrix a, std::vector<ld> b) {
  const std::size_t n = b.size();
  for (std::size_t c = 0; c < n; ++c) {
    std::size_t piv = c;
    for (std::size_t r = c + 1; r < n; ++r)
      if (std::fabs(a[r][c]) > std::fabs(a[piv][c])) piv = r;
    std::swap(a[c], a[piv]);
    std::swap(b[c], b[piv]);
    for (std::size_t r = c + 1; r < n; ++r) {
      const ld f = a[r][c] / a[c][c];
      for (std::size_t q = c; q < n; ++q) a[r][q] -= f * a[c][q];
      b[r] -= f * b[c];
    }
  }
  std::vector<ld> x(n);
  for (std::size_t c = n; c-- > 0;) {
    ld s = b[c];
    for (std::size_t q = c + 1; q < n; ++q) s -= a[c][q] * x[q];
    x[c] = s / a[c][c];
  }
  return x;
}

/// Weighted normal equations for one regime:
/// [sum_ij w_ij T_j T_j'] beta = sum_ij w_ij x_ij T_j.
inline std::vector<ld> weighted_normal_equations(const regimix::DesignMatrix& d,
                                                 const std::vector<std::vector<double>>& curves,
                                                 const LdMatrix& weights) {
  const std::size_t q = static_cast<std::size_t>(d.cols());
  LdMatrix a(q, std::vector<ld>(q, 0));
  std::vector<ld> b(q, 0);
  for (std::size_t i = 0; i < curves.size(); ++i)
    for (std::size_t j = 0; j < curves[i].size(); ++j)
      for (std::size_t u = 0; u < q; ++u) {
        b[u] += weights[i][j] * design_value(d, static_cast<Index>(j), static_cast<Index>(u)) * curves[i][j];
        for (std::size_t v = 0; v < q; ++v)
          a[u][v] += weights[i][j] * design_value(d, static_cast<Index>(j), static_cast<Index>(u)) *
                     design_value(d, static_cast<Index>(j), static_cast<Index>(v));
      }
  return solve(a, b);
}

/// Q_w = sum_j sum_r c_jr log pi_r(t_j), linear domain.
inline ld logistic_objective(const regimix::LogisticWeights& w, const std::vector<double>& grid,
                             const regimix::MatrixXd& totals) {
  ld q = 0;
  for (std::size_t j = 0; j < grid.size(); ++j) {
    const auto pi = softmax_at(w, grid[j]);
    for (Index r = 0; r < w.regimes(); ++r)
      q += static_cast<ld>(totals(static_cast<Index>(j), r)) * std::log(pi[static_cast<std::size_t>(r)]);
  }
  return q;
}

/// Plain gradient ascent on Q_w with a backtracking step, as an optimizer
/// independent of the Newton solver.
inline regimix::LogisticWeights gradient_ascent(regimix::LogisticWeights w, const std::vector<double>& grid,
                                                const regimix::MatrixXd& totals, int iterations) {
  const Index dim = w.free_size();
  ld step = 1;
  for (int it = 0; it < iterations; ++it) {
    regimix::VectorXd v = w.free();
    std::vector<ld> g(static_cast<std::size_t>(dim), 0);
    for (std::size_t j = 0; j < grid.size(); ++j) {
      const auto pi = softmax_at(w, grid[j]);
      ld wj = 0;
      for (Index r = 0; r < w.regimes(); ++r) wj += totals(static_cast<Index>(j), r);
      for (Index r = 0; r + 1 < w.regimes(); ++r) {
        const ld c = totals(static_cast<Index>(j), r) - wj * pi[static_cast<std::size_t>(r)];
        g[static_cast<std::size_t>(2 * r)] += c;
        g[static_cast<std::size_t>(2 * r + 1)] += c * grid[j];
      }
    }
    const ld q0 = logistic_objective(w, grid, totals);
    step *= 2;
    while (step > 1e-30L) {
      regimix::VectorXd trial = v;
      for (Index u = 0; u < dim; ++u) trial[u] += static_cast<double>(step * g[static_cast<std::size_t>(u)]);
      const auto tw = w.with_free(trial);
      if (logistic_objective(tw, grid, totals) > q0) {
        w = tw;
        break;
      }
      step /= 2;
    }
  }
  return w;
}

}  // namespace oracle
