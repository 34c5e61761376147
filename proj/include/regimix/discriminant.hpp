#pragma once

// Model-based curve classifier: one fitted density per class, class priors
// from training proportions, and the MAP decision rule.

#include <regimix/baselines.hpp>
#include <regimix/core.hpp>
#include <regimix/mixrhlp.hpp>

#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace regimix {

enum class Variant { flda_pr, flda_sr, flda_rhlp, fmda_prm, fmda_srm, fmda_mixrhlp };

inline constexpr Variant kAllVariants[] = {Variant::flda_pr,  Variant::flda_sr,  Variant::flda_rhlp,
                                           Variant::fmda_prm, Variant::fmda_srm, Variant::fmda_mixrhlp};

inline std::string_view variant_name(Variant v) {
  switch (v) {
    case Variant::flda_pr: return "flda-pr";
    case Variant::flda_sr: return "flda-sr";
    case Variant::flda_rhlp: return "flda-rhlp";
    case Variant::fmda_prm: return "fmda-prm";
    case Variant::fmda_srm: return "fmda-srm";
    case Variant::fmda_mixrhlp: return "fmda-mixrhlp";
  }
  return "?";
}

inline Variant parse_variant(std::string_view s) {
  for (Variant v : kAllVariants)
    if (variant_name(v) == s) return v;
  throw ConfigError("unknown variant '" + std::string(s) + "'");
}

inline bool is_mixture_variant(Variant v) {
  return v == Variant::fmda_prm || v == Variant::fmda_srm || v == Variant::fmda_mixrhlp;
}
inline bool is_spline_variant(Variant v) { return v == Variant::flda_sr || v == Variant::fmda_srm; }
inline bool is_rhlp_variant(Variant v) { return v == Variant::flda_rhlp || v == Variant::fmda_mixrhlp; }

struct VariantConfig {
  std::vector<int> K{1};  // one entry for every class, or one per class
  int R = 1;
  int p = 0;
  int spline_order = 4;
  int interior_knots = 10;
  EmOptions em;

  int clusters_for(Variant v, int g) const {
    if (!is_mixture_variant(v)) return 1;
    if (K.size() == 1) return K[0];
    if (g < 1 || g > static_cast<int>(K.size())) throw ConfigError("no K given for class " + std::to_string(g));
    return K[static_cast<std::size_t>(g - 1)];
  }

  BasisSpec basis(Variant v) const {
    return is_spline_variant(v) ? BasisSpec::bspline(spline_order, interior_knots) : BasisSpec::polynomial(p);
  }
};

using ClassDensity = std::variant<SingleRegressionParams, RegressionMixtureParams, MixRhlpParams>;

struct ClassifierModel {
  Variant variant = Variant::flda_pr;
  VectorXd priors;
  std::vector<ClassDensity> class_models;
  BasisSpec basis;
  GridPtr grid;
  DesignMatrix design;  // basis evaluated on grid

  int num_classes() const { return static_cast<int>(priors.size()); }
};

struct TrainResult {
  ClassifierModel model;
  std::vector<FitReport> reports;  // one per class
};

/// Seed of the fit for class g; does not depend on the other classes.
inline std::uint64_t class_seed(std::uint64_t master, int g) {
  return derive_seed(master, {0xC1A55ULL, static_cast<std::uint64_t>(g)});
}

inline ClassDensity fit_class_density(Variant v, const CurveSet& data, const DesignMatrix& design,
                                      const VariantConfig& cfg, int g, FitReport& report) {
  EmOptions em = cfg.em;
  em.seed = class_seed(cfg.em.seed, g);
  switch (v) {
    case Variant::flda_pr:
    case Variant::flda_sr: {
      SingleRegressionParams p = fit_single_regression(data, design);
      double ll = 0.0;
      for (Index i = 0; i < data.n(); ++i) ll += single_regression_curve_loglik(p, data.curve(i), design);
      report = FitReport{};
      report.loglik_trace = {ll};
      report.converged = true;
      report.restarts_tried = 1;
      report.restart_traces = {report.loglik_trace};
      report.bic = ll - 0.5 * static_cast<double>(design.cols() + 1) * std::log(static_cast<double>(data.n()));
      return p;
    }
    case Variant::fmda_prm:
    case Variant::fmda_srm: {
      RegressionMixtureFit fit = fit_regression_mixture(data, design, cfg.clusters_for(v, g), em);
      report = std::move(fit.report);
      return std::move(fit.params);
    }
    case Variant::flda_rhlp:
    case Variant::fmda_mixrhlp: {
      MixRhlpFit fit = em_fit(data, MixRhlpConfig{cfg.clusters_for(v, g), {cfg.R}, cfg.p, em});
      report = std::move(fit.report);
      return std::move(fit.params);
    }
  }
  throw ConfigError("unknown variant");
}

/// Priors are class proportions; each class density is fitted on its own curves.
inline TrainResult train(const LabeledCurveSet& data, Variant v, const VariantConfig& cfg) {
  check_em_options(cfg.em);
  TrainResult out;
  ClassifierModel& model = out.model;
  model.variant = v;
  model.basis = cfg.basis(v);
  model.grid = data.grid_ptr();
  model.design = make_design(data.grid(), model.basis);
  const int G = data.num_classes();
  model.priors.resize(G);
  model.class_models.resize(static_cast<std::size_t>(G));
  out.reports.resize(static_cast<std::size_t>(G));
  for (int g = 1; g <= G; ++g) {
    model.priors[g - 1] = static_cast<double>(data.class_size(g)) / static_cast<double>(data.n());
    model.class_models[static_cast<std::size_t>(g - 1)] =
        fit_class_density(v, data.class_slice(g), model.design, cfg, g, out.reports[static_cast<std::size_t>(g - 1)]);
  }
  return out;
}

/// log p(x | class g).
inline double class_loglik(const ClassifierModel& model, int g, const CurveView& x) {
  const ClassDensity& d = model.class_models.at(static_cast<std::size_t>(g - 1));
  if (const auto* s = std::get_if<SingleRegressionParams>(&d)) return single_regression_curve_loglik(*s, x, model.design);
  if (const auto* r = std::get_if<RegressionMixtureParams>(&d)) return regression_mixture_curve_loglik(*r, x, model.design);
  return mixrhlp_curve_loglik(std::get<MixRhlpParams>(d), x, *model.grid, model.design);
}

struct Classification {
  int label = 1;
  VectorXd posteriors;    // G, sums to one
  VectorXd class_loglik;  // G
};

/// MAP rule over log w_g + log p(x | g), normalized in log domain. Ties go to
/// the smallest class index.
inline Classification classify_values(const ClassifierModel& model, const CurveView& x) {
  const int G = model.num_classes();
  if (x.size() != model.grid->size()) throw DataError("curve does not match the model grid");
  Classification c{1, VectorXd(G), VectorXd(G)};
  VectorXd score(G);
  for (int g = 1; g <= G; ++g) {
    c.class_loglik[g - 1] = class_loglik(model, g, x);
    score[g - 1] = std::log(model.priors[g - 1]) + c.class_loglik[g - 1];
  }
  const double lse = logsumexp(score);
  if (!std::isfinite(lse)) throw NumericalError("curve has zero density under every class");
  c.posteriors = (score.array() - lse).exp();
  c.posteriors /= c.posteriors.sum();
  for (int g = 2; g <= G; ++g)
    if (score[g - 1] > score[c.label - 1]) c.label = g;
  return c;
}

inline Classification classify(const ClassifierModel& model, const Curve& curve) {
  if (!(curve.grid() == *model.grid)) throw DataError("curve grid differs from the model grid");
  return classify_values(model, curve.values());
}

/// Number of mean curves (clusters) describing class g.
inline Index class_cluster_count(const ClassifierModel& model, int g) {
  const ClassDensity& d = model.class_models.at(static_cast<std::size_t>(g - 1));
  if (std::holds_alternative<SingleRegressionParams>(d)) return 1;
  if (const auto* r = std::get_if<RegressionMixtureParams>(&d)) return r->components_count();
  return std::get<MixRhlpParams>(d).clusters_count();
}

/// Mean curves of class g as rows (one row for FLDA variants, K_g for FMDA).
inline MatrixXd class_mean_curves(const ClassifierModel& model, int g) {
  if (g < 1 || g > model.num_classes()) throw ConfigError("class index out of range");
  const ClassDensity& d = model.class_models[static_cast<std::size_t>(g - 1)];
  if (const auto* s = std::get_if<SingleRegressionParams>(&d)) return (model.design.entries * s->beta).transpose();
  if (const auto* r = std::get_if<RegressionMixtureParams>(&d)) return regression_mixture_mean_curves(*r, model.design);
  return mean_curves(std::get<MixRhlpParams>(d), *model.grid, model.design);
}

/// Posterior cluster memberships of a curve under the class g density.
inline VectorXd cluster_posteriors(const ClassifierModel& model, int g, const CurveView& x) {
  const ClassDensity& d = model.class_models.at(static_cast<std::size_t>(g - 1));
  if (std::holds_alternative<SingleRegressionParams>(d)) return VectorXd::Ones(1);
  VectorXd score;
  if (const auto* r = std::get_if<RegressionMixtureParams>(&d)) {
    score.resize(r->components_count());
    for (Index k = 0; k < score.size(); ++k)
      score[k] = std::log(r->alphas[k]) +
                 single_regression_curve_loglik(r->components[static_cast<std::size_t>(k)], x, model.design);
  } else {
    const auto& mp = std::get<MixRhlpParams>(d);
    score.resize(mp.clusters_count());
    for (Index k = 0; k < score.size(); ++k)
      score[k] = std::log(mp.alphas[k]) +
                 rhlp_curve_loglik(mp.clusters[static_cast<std::size_t>(k)], x, *model.grid, model.design);
  }
  const double lse = logsumexp(score);
  VectorXd gamma = (score.array() - lse).exp();
  return gamma / gamma.sum();
}

/// argmax_k gamma_ik, ties to the smaller index.
inline Index assigned_cluster(const ClassifierModel& model, int g, const CurveView& x) {
  const VectorXd gamma = cluster_posteriors(model, g, x);
  Index best = 0;
  for (Index k = 1; k < gamma.size(); ++k)
    if (gamma[k] > gamma[best]) best = k;
  return best;
}

}  // namespace regimix
