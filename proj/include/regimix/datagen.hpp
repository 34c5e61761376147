#pragma once

// Synthetic benchmarks: piecewise-regime classes built from sub-classes, and
// Breiman's waveforms with the first two classes merged.

#include <regimix/core.hpp>
#include <regimix/random.hpp>

#include <cmath>
#include <vector>

namespace regimix {

struct SubclassSpec {
  std::vector<double> levels;      // R regime levels
  std::vector<double> boundaries;  // R - 1 switch times inside the span
  double transition_width = 0.0;   // 0: abrupt steps; > 0: logistic ramps of this time scale
  int curves = 10;
  int label = 1;
};

struct PiecewiseSpec {
  std::vector<SubclassSpec> subclasses;
  double noise_sd = 1.0;
  Index m = 200;
  double t_start = 0.0;
  double t_end = 1.0;

  void validate() const {
    if (subclasses.empty()) throw ConfigError("piecewise benchmark needs at least one sub-class");
    if (m < 2) throw ConfigError("piecewise benchmark needs m >= 2");
    if (!(t_end > t_start)) throw ConfigError("empty time span");
    if (!(noise_sd >= 0.0)) throw ConfigError("noise_sd must be >= 0");
    for (const auto& s : subclasses) {
      if (s.levels.empty() || s.boundaries.size() + 1 != s.levels.size())
        throw ConfigError("sub-class needs R levels and R - 1 boundaries");
      for (std::size_t r = 0; r < s.boundaries.size(); ++r) {
        if (!(s.boundaries[r] > t_start && s.boundaries[r] < t_end))
          throw ConfigError("regime boundary outside the time span");
        if (r > 0 && !(s.boundaries[r] > s.boundaries[r - 1])) throw ConfigError("boundaries must increase");
      }
      if (s.curves < 0 || s.label < 1) throw ConfigError("invalid sub-class curve count or label");
      if (s.transition_width < 0.0) throw ConfigError("transition width must be >= 0");
    }
  }
};

/// Class 1: three sub-classes with levels (5,7,4), (6,4,7), (3,6,5) switching
/// at 1/3 and 2/3 of [0, 1]. Class 2: levels (5,7,4) switching at 0.3 and 0.7,
/// so it differs from the first sub-class of class 1 only in its switch times.
inline PiecewiseSpec default_piecewise_spec() {
  PiecewiseSpec spec;
  const std::vector<double> cuts{1.0 / 3.0, 2.0 / 3.0};
  spec.subclasses = {
      {{5.0, 7.0, 4.0}, cuts, 0.0, 10, 1},
      {{6.0, 4.0, 7.0}, cuts, 0.0, 10, 1},
      {{3.0, 6.0, 5.0}, cuts, 0.0, 10, 1},
      {{5.0, 7.0, 4.0}, {0.3, 0.7}, 0.0, 10, 2},
  };
  return spec;
}

/// Noise-free mean of a sub-class at time t.
inline double piecewise_mean(const SubclassSpec& s, double t) {
  if (s.transition_width == 0.0) {
    std::size_t r = 0;
    while (r < s.boundaries.size() && t >= s.boundaries[r]) ++r;
    return s.levels[r];
  }
  double v = s.levels[0];
  for (std::size_t r = 0; r < s.boundaries.size(); ++r)
    v += (s.levels[r + 1] - s.levels[r]) / (1.0 + std::exp(-(t - s.boundaries[r]) / s.transition_width));
  return v;
}

struct GeneratedSet {
  LabeledCurveSet data;
  std::vector<int> origin;  // generating sub-class (0-based) or original class (1-based for waveforms)
};

/// Curve c (counting across sub-classes in order) draws its noise from the
/// sub-stream (seed, c).
inline GeneratedSet gen_piecewise(const PiecewiseSpec& spec, std::uint64_t seed) {
  spec.validate();
  const GridPtr grid = make_grid(TimeGrid::uniform(spec.t_start, spec.t_end, spec.m));
  Index n = 0;
  for (const auto& s : spec.subclasses) n += s.curves;
  MatrixXd values(n, spec.m);
  std::vector<int> labels, origin;
  Index c = 0;
  for (std::size_t sc = 0; sc < spec.subclasses.size(); ++sc) {
    const SubclassSpec& s = spec.subclasses[sc];
    for (int k = 0; k < s.curves; ++k, ++c) {
      CounterRng rng(derive_seed(seed, {static_cast<std::uint64_t>(c)}));
      for (Index j = 0; j < spec.m; ++j) values(c, j) = piecewise_mean(s, (*grid)[j]) + spec.noise_sd * rng.normal();
      labels.push_back(s.label);
      origin.push_back(static_cast<int>(sc));
    }
  }
  return {LabeledCurveSet(grid, std::move(values), std::move(labels)), std::move(origin)};
}

// ---------------------------------------------------------------------------
// Waveforms

/// Triangular base shapes: f1 peaks at t = 11, f2 at 15, f3 at 7.
inline double waveform_base(int which, double t) {
  auto f1 = [](double s) { return std::max(6.0 - std::abs(s - 11.0), 0.0); };
  switch (which) {
    case 1: return f1(t);
    case 2: return f1(t - 4.0);
    case 3: return f1(t + 4.0);
  }
  throw ConfigError("waveform base index must be 1, 2 or 3");
}

/// Mean of an original waveform class (1, 2 or 3) for mixing weight u.
inline double waveform_mean(int original_class, double u, double t) {
  switch (original_class) {
    case 1: return u * waveform_base(1, t) + (1.0 - u) * waveform_base(2, t);
    case 2: return u * waveform_base(2, t) + (1.0 - u) * waveform_base(3, t);
    case 3: return u * waveform_base(1, t) + (1.0 - u) * waveform_base(3, t);
  }
  throw ConfigError("waveform class must be 1, 2 or 3");
}

struct WaveformSpec {
  int curves_per_class = 500;
  bool merge = true;  // original classes 1 and 2 become class 1, class 3 becomes class 2
  double noise_sd = 1.0;
};

inline GridPtr waveform_grid() { return make_grid(TimeGrid::uniform(0.0, 20.0, 21)); }

/// Curves are ordered by original class; curve c draws u, then the noise,
/// from the sub-stream (seed, c). `origin` holds the original class.
inline GeneratedSet gen_waveform(const WaveformSpec& spec, std::uint64_t seed) {
  if (spec.curves_per_class < 1) throw ConfigError("need at least one curve per class");
  if (!(spec.noise_sd >= 0.0)) throw ConfigError("noise_sd must be >= 0");
  const GridPtr grid = waveform_grid();
  const Index m = grid->size();
  const Index n = 3 * static_cast<Index>(spec.curves_per_class);
  MatrixXd values(n, m);
  std::vector<int> labels, origin;
  Index c = 0;
  for (int cls = 1; cls <= 3; ++cls)
    for (int k = 0; k < spec.curves_per_class; ++k, ++c) {
      CounterRng rng(derive_seed(seed, {static_cast<std::uint64_t>(c)}));
      const double u = rng.uniform();
      for (Index j = 0; j < m; ++j) values(c, j) = waveform_mean(cls, u, (*grid)[j]) + spec.noise_sd * rng.normal();
      labels.push_back(spec.merge ? (cls == 3 ? 2 : 1) : cls);
      origin.push_back(cls);
    }
  return {LabeledCurveSet(grid, std::move(values), std::move(labels)), std::move(origin)};
}

}  // namespace regimix
