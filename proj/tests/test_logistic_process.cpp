#include "fixtures.hpp"
#include "oracles.hpp"

#include <gtest/gtest.h>

using namespace regimix;
using fixtures::uniform_in;

namespace {

LogisticWeights random_weights(CounterRng& rng, Index R, double t_scale) {
  MatrixXd rows(R, 2);
  for (Index r = 0; r < R; ++r) rows.row(r) << uniform_in(rng, -3, 3), uniform_in(rng, -4, 4) / t_scale;
  return LogisticWeights(rows);
}

MatrixXd random_totals(CounterRng& rng, Index m, Index R) {
  MatrixXd t(m, R);
  for (Index j = 0; j < m; ++j)
    for (Index r = 0; r < R; ++r) t(j, r) = uniform_in(rng, 0.0, 3.0);
  return t;
}

}  // namespace

TEST(LogisticWeights, GaugeFixesLastRow) {
  MatrixXd rows(3, 2);
  rows << 1, 2, 3, 4, 5, 6;
  const LogisticWeights w(rows);
  EXPECT_EQ(w.rows().row(2).norm(), 0.0);
  EXPECT_EQ(w.intercept(0), -4.0);
  EXPECT_EQ(w.slope(1), -2.0);
  EXPECT_EQ(w.free(), (VectorXd(4) << -4, -4, -2, -2).finished());
  const TimeGrid g = TimeGrid::uniform(0, 1, 5);
  MatrixXd shifted = rows;
  shifted.rowwise() += Eigen::RowVector2d(0.7, -1.1);
  EXPECT_LT((regime_probabilities(LogisticWeights(shifted), g) - regime_probabilities(w, g)).norm(), 1e-14);
}

TEST(LogisticWeights, WithFreeRoundTrips) {
  CounterRng rng(1);
  const LogisticWeights w = random_weights(rng, 4, 1.0);
  const VectorXd v = VectorXd::LinSpaced(6, -1, 1);
  EXPECT_EQ(w.with_free(v).free(), v);
  EXPECT_EQ(w.with_free(v).rows().row(3).norm(), 0.0);
}

TEST(RegimeProbabilities, MatchDirectSoftmax) {
  CounterRng rng(2);
  const TimeGrid g = TimeGrid::uniform(-1, 4, 17);
  for (int rep = 0; rep < 10; ++rep) {
    const LogisticWeights w = random_weights(rng, 1 + rep % 4, 5.0);
    const MatrixXd p = regime_probabilities(w, g);
    const MatrixXd lp = log_regime_probabilities(w, g);
    for (Index j = 0; j < g.size(); ++j) {
      EXPECT_NEAR(p.row(j).sum(), 1.0, 1e-14);
      const auto ref = oracle::softmax_at(w, g[j]);
      for (Index r = 0; r < w.regimes(); ++r) {
        EXPECT_NEAR(p(j, r), static_cast<double>(ref[static_cast<std::size_t>(r)]), 1e-14);
        EXPECT_NEAR(lp(j, r), static_cast<double>(std::log(ref[static_cast<std::size_t>(r)])), 1e-12);
      }
    }
  }
}

TEST(RegimeProbabilities, ExtremeScoresStayFinite) {
  MatrixXd rows(2, 2);
  rows << 0.0, 5000.0, 0.0, 0.0;
  const TimeGrid g = TimeGrid::uniform(-1, 1, 5);
  const MatrixXd p = regime_probabilities(LogisticWeights(rows), g);
  const MatrixXd lp = log_regime_probabilities(LogisticWeights(rows), g);
  EXPECT_TRUE(p.allFinite());
  EXPECT_TRUE(lp.allFinite());
  EXPECT_EQ(p(0, 1), 1.0);
  EXPECT_EQ(p(4, 0), 1.0);
}

TEST(LogisticObjective, MatchesOracle) {
  CounterRng rng(3);
  const TimeGrid g = TimeGrid::uniform(0, 2, 11);
  for (int rep = 0; rep < 10; ++rep) {
    const LogisticWeights w = random_weights(rng, 2 + rep % 3, 2.0);
    const MatrixXd totals = random_totals(rng, g.size(), w.regimes());
    const double ref = static_cast<double>(oracle::logistic_objective(w, fixtures::to_std(g.points()), totals));
    EXPECT_NEAR(logistic_objective(w, g, totals), ref, 1e-11 * (1 + std::abs(ref)));
  }
}

TEST(RegimeWeightTable, TotalsSumOverCurves) {
  RegimeWeightTable t(3, 2, 2);
  for (Index i = 0; i < 3; ++i)
    for (Index j = 0; j < 2; ++j)
      for (Index r = 0; r < 2; ++r) t(i, j, r) = static_cast<double>(i + 10 * j + 100 * r);
  const MatrixXd s = t.totals();
  EXPECT_EQ(s(0, 0), 3.0);
  EXPECT_EQ(s(1, 1), 3.0 + 30.0 + 300.0);
}

// Finite-difference check of the analytic gradient, and concavity.
TEST(QwGradientHessian, GradientMatchesCentralDifferencesAndHessianIsNegative) {
  CounterRng rng(4);
  for (int rep = 0; rep < 20; ++rep) {
    const Index R = 2 + rep % 3;
    const Index m = 5 + static_cast<Index>(rng.below(30));
    const TimeGrid g = TimeGrid::uniform(0.0, uniform_in(rng, 0.5, 3.0), m);
    const LogisticWeights w = random_weights(rng, R, g.back());
    const MatrixXd totals = random_totals(rng, m, R);
    const GradientHessian gh = qw_gradient_hessian(w, g, totals);
    const VectorXd v = w.free();
    const double h = 1e-6;
    VectorXd fd(v.size());
    for (Index u = 0; u < v.size(); ++u) {
      VectorXd a = v, b = v;
      a[u] += h;
      b[u] -= h;
      fd[u] = (logistic_objective(w.with_free(a), g, totals) - logistic_objective(w.with_free(b), g, totals)) / (2 * h);
    }
    EXPECT_LT((fd - gh.gradient).norm() / std::max(1.0, gh.gradient.norm()), 1e-4) << "instance " << rep;
    Eigen::SelfAdjointEigenSolver<MatrixXd> eig(gh.hessian);
    EXPECT_LE(eig.eigenvalues().maxCoeff(), 1e-10) << "instance " << rep;
    EXPECT_LT((gh.hessian - gh.hessian.transpose()).norm(), 1e-12 * (1 + gh.hessian.norm()));
  }
}

TEST(QwGradientHessian, HessianMatchesDifferencesOfGradient) {
  CounterRng rng(5);
  const TimeGrid g = TimeGrid::uniform(0.0, 1.0, 15);
  const LogisticWeights w = random_weights(rng, 3, 1.0);
  const MatrixXd totals = random_totals(rng, 15, 3);
  const GradientHessian gh = qw_gradient_hessian(w, g, totals);
  const VectorXd v = w.free();
  const double h = 1e-6;
  for (Index u = 0; u < v.size(); ++u) {
    VectorXd a = v, b = v;
    a[u] += h;
    b[u] -= h;
    const VectorXd col = (qw_gradient_hessian(w.with_free(a), g, totals).gradient -
                          qw_gradient_hessian(w.with_free(b), g, totals).gradient) /
                         (2 * h);
    EXPECT_LT((col - gh.hessian.col(u)).norm(), 1e-5 * (1 + gh.hessian.norm()));
  }
}

TEST(QwGradientHessian, SingleRegimeIsEmpty) {
  const GradientHessian gh = qw_gradient_hessian(LogisticWeights(1), TimeGrid::uniform(0, 1, 4), MatrixXd::Ones(4, 1));
  EXPECT_EQ(gh.gradient.size(), 0);
}

TEST(Irls, ReachesGradientAscentOptimum) {
  CounterRng rng(6);
  for (int rep = 0; rep < 8; ++rep) {
    const Index R = 2 + rep % 3;
    const TimeGrid g = TimeGrid::uniform(0.0, 1.0, 25);
    const MatrixXd totals = random_totals(rng, 25, R);
    const LogisticWeights start(R);
    const IrlsResult res = irls_fit(start, g, totals, IrlsOptions{200, 1e-14, 40});
    const LogisticWeights ref = oracle::gradient_ascent(start, fixtures::to_std(g.points()), totals, 20000);
    const double q_irls = logistic_objective(res.weights, g, totals);
    const double q_ref = logistic_objective(ref, g, totals);
    EXPECT_GE(q_irls, q_ref - 1e-7 * std::abs(q_ref)) << "instance " << rep;
    EXPECT_LT(qw_gradient_hessian(res.weights, g, totals).gradient.norm(), 1e-5 * (1 + totals.sum()));
    for (std::size_t s = 1; s < res.objective_trace.size(); ++s)
      EXPECT_GE(res.objective_trace[s], res.objective_trace[s - 1]);
  }
}

TEST(Irls, SeparableCountsStayFiniteAndAscend) {
  // Regime 0 owns t < 0.5 exactly: the optimum is at infinity.
  const TimeGrid g = TimeGrid::uniform(0.0, 1.0, 20);
  MatrixXd totals = MatrixXd::Zero(20, 2);
  for (Index j = 0; j < 20; ++j) totals(j, g[j] < 0.5 ? 0 : 1) = 1.0;
  const IrlsResult res = irls_fit(LogisticWeights(2), g, totals, IrlsOptions{50, 1e-8, 30});
  EXPECT_TRUE(res.weights.rows().allFinite());
  EXPECT_GT(res.objective_trace.back(), res.objective_trace.front());
  EXPECT_GT(regime_probabilities(res.weights, g)(0, 0), 0.99);
}

TEST(Irls, SingleRegimeReturnsImmediately) {
  const IrlsResult res = irls_fit(LogisticWeights(1), TimeGrid::uniform(0, 1, 3), MatrixXd::Ones(3, 1));
  EXPECT_TRUE(res.converged);
  EXPECT_EQ(res.iterations, 0);
}
