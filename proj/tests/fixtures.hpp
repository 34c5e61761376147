#pragma once

// Seeded random instances shared by the test suites.

#include <regimix/regimix.hpp>

#include <vector>

namespace fixtures {

using namespace regimix;

inline std::vector<double> to_std(const VectorXd& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

inline std::vector<std::vector<double>> rows_of(const MatrixXd& x) {
  std::vector<std::vector<double>> out;
  for (Index i = 0; i < x.rows(); ++i) out.push_back(to_std(x.row(i).transpose()));
  return out;
}

inline double uniform_in(CounterRng& rng, double a, double b) { return a + (b - a) * rng.uniform(); }

/// Random MixRHLP parameters with proportions bounded away from zero.
inline MixRhlpParams random_params(CounterRng& rng, const std::vector<int>& regimes, Index d, double t_scale) {
  MixRhlpParams p;
  const Index K = static_cast<Index>(regimes.size());
  p.alphas.resize(K);
  for (Index k = 0; k < K; ++k) p.alphas[k] = 0.5 + rng.uniform();
  p.alphas /= p.alphas.sum();
  for (int R : regimes) {
    MatrixXd rows(R, 2);
    for (int r = 0; r < R; ++r) rows.row(r) << uniform_in(rng, -2, 2), uniform_in(rng, -3, 3) / t_scale;
    MatrixXd betas(d, R);
    for (Index q = 0; q < d; ++q)
      for (int r = 0; r < R; ++r) betas(q, r) = uniform_in(rng, -2, 2) / std::pow(t_scale, static_cast<double>(q));
    VectorXd var(R);
    for (int r = 0; r < R; ++r) var[r] = uniform_in(rng, 0.3, 2.0);
    p.clusters.push_back({LogisticWeights(rows), betas, var});
  }
  return p;
}

/// Curves drawn from the model itself.
inline MatrixXd sample_curves(const MixRhlpParams& p, const TimeGrid& grid, const DesignMatrix& design, Index n,
                              CounterRng& rng) {
  MatrixXd x(n, grid.size());
  for (Index i = 0; i < n; ++i) {
    const double u = rng.uniform();
    Index k = 0;
    double acc = p.alphas[0];
    while (k + 1 < p.clusters_count() && u > acc) acc += p.alphas[++k];
    const RhlpParams& c = p.clusters[static_cast<std::size_t>(k)];
    const MatrixXd pi = regime_probabilities(c.logistic, grid);
    for (Index j = 0; j < grid.size(); ++j) {
      const double v = rng.uniform();
      Index r = 0;
      double a = pi(j, 0);
      while (r + 1 < c.regimes() && v > a) a += pi(j, ++r);
      x(i, j) = design.entries.row(j).dot(c.betas.col(r)) + std::sqrt(c.variances[r]) * rng.normal();
    }
  }
  return x;
}

inline LabeledCurveSet single_class(GridPtr grid, MatrixXd x) {
  std::vector<int> labels(static_cast<std::size_t>(x.rows()), 1);
  return LabeledCurveSet(std::move(grid), std::move(x), std::move(labels));
}

}  // namespace fixtures
