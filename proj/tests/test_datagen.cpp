#include <regimix/regimix.hpp>

#include <gtest/gtest.h>

#include <cmath>

using namespace regimix;

TEST(Piecewise, DefaultShape) {
  const GeneratedSet gs = gen_piecewise(default_piecewise_spec(), 1);
  EXPECT_EQ(gs.data.m(), 200);
  EXPECT_EQ(gs.data.n(), 40);
  EXPECT_EQ(gs.data.class_size(1), 30);
  EXPECT_EQ(gs.data.class_size(2), 10);
  EXPECT_EQ(gs.origin[35], 3);
  EXPECT_EQ(gs.data.grid().front(), 0.0);
  EXPECT_EQ(gs.data.grid().back(), 1.0);
}

TEST(Piecewise, ZeroNoiseIsTheMeanExactly) {
  PiecewiseSpec s = default_piecewise_spec();
  s.noise_sd = 0.0;
  const GeneratedSet gs = gen_piecewise(s, 9);
  for (Index i = 0; i < gs.data.n(); ++i) {
    const SubclassSpec& sc = s.subclasses[static_cast<std::size_t>(gs.origin[static_cast<std::size_t>(i)])];
    for (Index j = 0; j < gs.data.m(); ++j) EXPECT_EQ(gs.data.values()(i, j), piecewise_mean(sc, gs.data.grid()[j]));
  }
}

TEST(Piecewise, StepMeanSwitchesAtBoundaries) {
  const SubclassSpec s{{5, 7, 4}, {0.3, 0.7}, 0.0, 1, 1};
  EXPECT_EQ(piecewise_mean(s, 0.0), 5.0);
  EXPECT_EQ(piecewise_mean(s, 0.29), 5.0);
  EXPECT_EQ(piecewise_mean(s, 0.3), 7.0);
  EXPECT_EQ(piecewise_mean(s, 0.69), 7.0);
  EXPECT_EQ(piecewise_mean(s, 1.0), 4.0);
  const SubclassSpec smooth{{5, 7, 4}, {0.3, 0.7}, 0.01, 1, 1};
  EXPECT_NEAR(piecewise_mean(smooth, 0.3), 6.0, 1e-6);
  EXPECT_NEAR(piecewise_mean(smooth, 0.5), 7.0, 1e-6);
  EXPECT_NEAR(piecewise_mean(smooth, 0.0), 5.0, 1e-6);
}

TEST(Piecewise, SampleMeanWithinLawOfLargeNumbersBound) {
  PiecewiseSpec s;
  s.subclasses = {{{6, 4, 7}, {1.0 / 3, 2.0 / 3}, 0.0, 1000, 1}};
  s.m = 30;
  const GeneratedSet gs = gen_piecewise(s, 4);
  const VectorXd mean = gs.data.values().colwise().mean();
  for (Index j = 0; j < 30; ++j)
    EXPECT_LT(std::abs(mean[j] - piecewise_mean(s.subclasses[0], gs.data.grid()[j])),
              4.0 * s.noise_sd / std::sqrt(1000.0));
}

TEST(Piecewise, DeterministicPerSeed) {
  const auto a = gen_piecewise(default_piecewise_spec(), 5);
  const auto b = gen_piecewise(default_piecewise_spec(), 5);
  const auto c = gen_piecewise(default_piecewise_spec(), 6);
  EXPECT_EQ(a.data.values(), b.data.values());
  EXPECT_NE(a.data.values(), c.data.values());
}

TEST(Piecewise, InvalidSpecs) {
  PiecewiseSpec s = default_piecewise_spec();
  s.subclasses[0].boundaries = {0.6, 0.4};
  EXPECT_THROW(gen_piecewise(s, 1), ConfigError);
  s = default_piecewise_spec();
  s.subclasses[0].boundaries = {0.5, 1.0};
  EXPECT_THROW(gen_piecewise(s, 1), ConfigError);
  s = default_piecewise_spec();
  s.noise_sd = -1.0;
  EXPECT_THROW(gen_piecewise(s, 1), ConfigError);
  s = default_piecewise_spec();
  s.subclasses[1].levels = {1, 2};
  EXPECT_THROW(gen_piecewise(s, 1), ConfigError);
}

TEST(Waveform, BaseShapes) {
  EXPECT_EQ(waveform_base(1, 11), 6.0);
  EXPECT_EQ(waveform_base(1, 5), 0.0);
  EXPECT_EQ(waveform_base(1, 17), 0.0);
  EXPECT_EQ(waveform_base(1, 8), 3.0);
  EXPECT_EQ(waveform_base(2, 15), 6.0);
  EXPECT_EQ(waveform_base(3, 7), 6.0);
  EXPECT_THROW(waveform_base(4, 0), ConfigError);
}

TEST(Waveform, MeanCollapsesToBaseShapes) {
  for (int t = 0; t <= 20; ++t) {
    EXPECT_EQ(waveform_mean(1, 1.0, t), waveform_base(1, t));
    EXPECT_EQ(waveform_mean(1, 0.0, t), waveform_base(2, t));
    EXPECT_EQ(waveform_mean(2, 1.0, t), waveform_base(2, t));
    EXPECT_EQ(waveform_mean(3, 0.0, t), waveform_base(3, t));
  }
}

TEST(Waveform, MergedLayout) {
  const GeneratedSet gs = gen_waveform(WaveformSpec{}, 7);
  EXPECT_EQ(gs.data.n(), 1500);
  EXPECT_EQ(gs.data.m(), 21);
  EXPECT_EQ(gs.data.num_classes(), 2);
  EXPECT_EQ(gs.data.class_size(1), 1000);
  EXPECT_EQ(gs.data.grid()[20], 20.0);
  // Class 1 is half original class 1, half original class 2.
  int from_first = 0;
  for (Index i : gs.data.class_indices(1)) from_first += gs.origin[static_cast<std::size_t>(i)] == 1;
  EXPECT_NEAR(from_first, 500, 3.0 * std::sqrt(1000 * 0.25));
  WaveformSpec unmerged;
  unmerged.merge = false;
  unmerged.curves_per_class = 4;
  EXPECT_EQ(gen_waveform(unmerged, 7).data.num_classes(), 3);
}

TEST(Waveform, VarianceDecomposition) {
  WaveformSpec s;
  s.curves_per_class = 5000;
  s.merge = false;
  const GeneratedSet gs = gen_waveform(s, 8);
  const CurveSet c3 = gs.data.class_slice(3);
  const VectorXd mean = c3.values().colwise().mean();
  for (Index j = 0; j < 21; ++j) {
    const double var = (c3.values().col(j).array() - mean[j]).square().sum() / (5000.0 - 1.0);
    const double diff = waveform_base(1, static_cast<double>(j)) - waveform_base(3, static_cast<double>(j));
    const double expected = diff * diff / 12.0 + 1.0;
    EXPECT_NEAR(var, expected, 0.1 * expected) << "t = " << j;
  }
}

TEST(Waveform, DeterministicPerSeed) {
  WaveformSpec s;
  s.curves_per_class = 20;
  EXPECT_EQ(gen_waveform(s, 3).data.values(), gen_waveform(s, 3).data.values());
}
