#pragma once

// JSON documents for fitted models, classifiers, fit and evaluation reports,
// and generator specs. Reals are written in shortest round-trip form, so a
// write/read cycle reproduces every double bit for bit.

#include <regimix/datagen.hpp>
#include <regimix/discriminant.hpp>
#include <regimix/evaluation.hpp>
#include <regimix/io.hpp>

#include <json.hpp>

#include <string>
#include <vector>

namespace regimix {

using Json = nlohmann::ordered_json;

inline constexpr int kFormatVersion = 1;

namespace detail {

inline Json to_json_vector(const VectorXd& v) {
  Json a = Json::array();
  for (Index i = 0; i < v.size(); ++i) a.push_back(v[i]);
  return a;
}

inline VectorXd vector_from_json(const Json& a) {
  if (!a.is_array()) throw DataError("expected a JSON array of numbers");
  VectorXd v(static_cast<Index>(a.size()));
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (!a[i].is_number()) throw DataError("expected a number in JSON array");
    v[static_cast<Index>(i)] = a[i].get<double>();
  }
  return v;
}

inline const Json& field(const Json& j, const char* key) {
  if (!j.is_object() || !j.contains(key)) throw DataError(std::string("missing JSON field '") + key + "'");
  return j.at(key);
}

inline void check_version(const Json& j) {
  if (field(j, "format_version").get<int>() != kFormatVersion)
    throw DataError("unsupported format_version " + j.at("format_version").dump());
}

}  // namespace detail

// --- per-class densities ----------------------------------------------------

inline Json to_json(const MixRhlpParams& params, int p) {
  Json j;
  j["format_version"] = kFormatVersion;
  j["model_kind"] = "mixrhlp";
  j["K"] = params.clusters_count();
  j["R"] = params.regimes();
  j["p"] = p;
  j["alphas"] = detail::to_json_vector(params.alphas);
  Json clusters = Json::array();
  for (const auto& c : params.clusters) {
    Json cj;
    Json w = Json::array();
    for (Index r = 0; r < c.logistic.regimes(); ++r) {
      w.push_back(c.logistic.rows()(r, 0));
      w.push_back(c.logistic.rows()(r, 1));
    }
    cj["logistic_weights"] = std::move(w);
    Json betas = Json::array();
    for (Index r = 0; r < c.betas.cols(); ++r) betas.push_back(detail::to_json_vector(c.betas.col(r)));
    cj["betas"] = std::move(betas);
    cj["variances"] = detail::to_json_vector(c.variances);
    clusters.push_back(std::move(cj));
  }
  j["clusters"] = std::move(clusters);
  return j;
}

inline MixRhlpParams mixrhlp_from_json(const Json& j) {
  detail::check_version(j);
  if (detail::field(j, "model_kind") != "mixrhlp") throw DataError("not a mixrhlp model document");
  MixRhlpParams p;
  p.alphas = detail::vector_from_json(detail::field(j, "alphas"));
  for (const Json& cj : detail::field(j, "clusters")) {
    const VectorXd w = detail::vector_from_json(detail::field(cj, "logistic_weights"));
    const VectorXd var = detail::vector_from_json(detail::field(cj, "variances"));
    const Json& bj = detail::field(cj, "betas");
    const Index R = var.size();
    if (w.size() != 2 * R || static_cast<Index>(bj.size()) != R) throw DataError("inconsistent regime count");
    MatrixXd rows(R, 2);
    for (Index r = 0; r < R; ++r) rows.row(r) << w[2 * r], w[2 * r + 1];
    MatrixXd betas;
    for (Index r = 0; r < R; ++r) {
      const VectorXd b = detail::vector_from_json(bj[static_cast<std::size_t>(r)]);
      if (r == 0) betas.resize(b.size(), R);
      if (b.size() != betas.rows()) throw DataError("inconsistent coefficient lengths");
      betas.col(r) = b;
    }
    p.clusters.push_back({LogisticWeights(rows), betas, var});
  }
  if (static_cast<Index>(p.clusters.size()) != p.alphas.size()) throw DataError("alphas and clusters differ in size");
  return p;
}

inline Json to_json(const SingleRegressionParams& s) {
  Json j;
  j["format_version"] = kFormatVersion;
  j["model_kind"] = "single_regression";
  j["beta"] = detail::to_json_vector(s.beta);
  j["variance"] = s.variance;
  return j;
}

inline Json to_json(const RegressionMixtureParams& r) {
  Json j;
  j["format_version"] = kFormatVersion;
  j["model_kind"] = "regression_mixture";
  j["K"] = r.components_count();
  j["alphas"] = detail::to_json_vector(r.alphas);
  Json comps = Json::array();
  for (const auto& c : r.components) comps.push_back(Json{{"beta", detail::to_json_vector(c.beta)}, {"variance", c.variance}});
  j["components"] = std::move(comps);
  return j;
}

inline Json to_json(const ClassDensity& d, int p) {
  return std::visit(
      [&](const auto& m) -> Json {
        if constexpr (std::is_same_v<std::decay_t<decltype(m)>, MixRhlpParams>)
          return to_json(m, p);
        else
          return to_json(m);
      },
      d);
}

inline ClassDensity class_density_from_json(const Json& j) {
  detail::check_version(j);
  const std::string kind = detail::field(j, "model_kind").get<std::string>();
  if (kind == "mixrhlp") return mixrhlp_from_json(j);
  if (kind == "single_regression")
    return SingleRegressionParams{detail::vector_from_json(detail::field(j, "beta")),
                                  detail::field(j, "variance").get<double>()};
  if (kind == "regression_mixture") {
    RegressionMixtureParams r;
    r.alphas = detail::vector_from_json(detail::field(j, "alphas"));
    for (const Json& c : detail::field(j, "components"))
      r.components.push_back({detail::vector_from_json(detail::field(c, "beta")), detail::field(c, "variance").get<double>()});
    return r;
  }
  throw DataError("unknown model_kind '" + kind + "'");
}

// --- classifier -------------------------------------------------------------

inline Json to_json(const BasisSpec& b) {
  if (b.kind == BasisKind::polynomial) return Json{{"kind", "polynomial"}, {"degree", b.degree}};
  return Json{{"kind", "bspline"}, {"order", b.order}, {"interior_knots", b.interior_knots}};
}

inline BasisSpec basis_from_json(const Json& j) {
  const std::string kind = detail::field(j, "kind").get<std::string>();
  if (kind == "polynomial") return BasisSpec::polynomial(detail::field(j, "degree").get<int>());
  if (kind == "bspline")
    return BasisSpec::bspline(detail::field(j, "order").get<int>(), detail::field(j, "interior_knots").get<int>());
  throw DataError("unknown basis kind '" + kind + "'");
}

inline Json to_json(const ClassifierModel& model) {
  Json j;
  j["format_version"] = kFormatVersion;
  j["variant"] = std::string(variant_name(model.variant));
  j["priors"] = detail::to_json_vector(model.priors);
  j["basis"] = to_json(model.basis);
  j["grid"] = detail::to_json_vector(model.grid->points());
  Json classes = Json::array();
  for (const auto& d : model.class_models) classes.push_back(to_json(d, model.basis.degree));
  j["class_models"] = std::move(classes);
  return j;
}

inline ClassifierModel classifier_from_json(const Json& j) {
  detail::check_version(j);
  ClassifierModel model;
  model.variant = parse_variant(detail::field(j, "variant").get<std::string>());
  model.priors = detail::vector_from_json(detail::field(j, "priors"));
  model.basis = basis_from_json(detail::field(j, "basis"));
  const VectorXd pts = detail::vector_from_json(detail::field(j, "grid"));
  model.grid = make_grid(TimeGrid(std::vector<double>(pts.data(), pts.data() + pts.size())));
  model.design = make_design(*model.grid, model.basis);
  for (const Json& c : detail::field(j, "class_models")) model.class_models.push_back(class_density_from_json(c));
  if (static_cast<Index>(model.class_models.size()) != model.priors.size())
    throw DataError("priors and class models differ in size");
  return model;
}

// --- reports and configs ----------------------------------------------------

inline Json to_json(const FitReport& r) {
  Json j;
  j["loglik_trace"] = r.loglik_trace;
  j["iterations"] = r.iterations;
  j["converged"] = r.converged;
  j["bic"] = r.bic;
  j["restarts_tried"] = r.restarts_tried;
  j["best_restart"] = r.best_restart;
  j["restart_traces"] = r.restart_traces;
  return j;
}

inline Json to_json(const EmOptions& em) {
  return Json{{"max_iter", em.max_iter},       {"tol", em.tol},
              {"n_restarts", em.n_restarts},   {"seed", em.seed},
              {"irls_max_iter", em.irls_max_iter}, {"irls_tol", em.irls_tol},
              {"init_slope_scale", em.init_slope_scale}};
}

inline Json to_json(const VariantConfig& c) {
  return Json{{"K", c.K},
              {"R", c.R},
              {"p", c.p},
              {"spline_order", c.spline_order},
              {"interior_knots", c.interior_knots},
              {"em", to_json(c.em)}};
}

inline Json to_json(const EvalReport& r) {
  Json j;
  j["variant"] = std::string(variant_name(r.variant));
  j["error_rate"] = r.cv.error_rate;
  j["per_fold_rates"] = r.cv.per_fold_rates;
  j["per_fold_errors"] = r.cv.per_fold_errors;
  j["per_fold_sizes"] = r.cv.per_fold_sizes;
  j["intra_class_inertia"] = r.intra_class_inertia;
  j["intra_class_inertia_all_clusters"] = r.intra_class_inertia_all_clusters;
  j["k_folds"] = r.k_folds;
  j["seed"] = r.seed;
  j["config"] = to_json(r.config);
  return j;
}

/// FNV-1a of a JSON document's compact dump, as 16 hex digits.
inline std::string config_hash(const Json& j) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : j.dump()) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

/// variant,error_rate,inertia,seed,config_hash
inline std::string eval_summary_csv_row(const EvalReport& r) {
  return std::string(variant_name(r.variant)) + "," + format_double(r.cv.error_rate) + "," +
         format_double(r.intra_class_inertia) + "," + std::to_string(r.seed) + "," + config_hash(to_json(r.config)) +
         "\n";
}

inline Json to_json(const PiecewiseSpec& s) {
  Json subs = Json::array();
  for (const auto& sc : s.subclasses)
    subs.push_back(Json{{"levels", sc.levels},
                        {"boundaries", sc.boundaries},
                        {"transition_width", sc.transition_width},
                        {"curves", sc.curves},
                        {"label", sc.label}});
  return Json{{"benchmark", "piecewise"}, {"noise_sd", s.noise_sd}, {"m", s.m},
              {"t_start", s.t_start},     {"t_end", s.t_end},       {"subclasses", std::move(subs)}};
}

/// Fields absent from `j` keep their values from `base`.
inline PiecewiseSpec piecewise_spec_from_json(const Json& j, PiecewiseSpec base = default_piecewise_spec()) {
  if (j.contains("noise_sd")) base.noise_sd = j.at("noise_sd").get<double>();
  if (j.contains("m")) base.m = j.at("m").get<Index>();
  if (j.contains("t_start")) base.t_start = j.at("t_start").get<double>();
  if (j.contains("t_end")) base.t_end = j.at("t_end").get<double>();
  if (j.contains("subclasses")) {
    base.subclasses.clear();
    for (const Json& sc : j.at("subclasses")) {
      SubclassSpec s;
      s.levels = detail::field(sc, "levels").get<std::vector<double>>();
      s.boundaries = detail::field(sc, "boundaries").get<std::vector<double>>();
      s.transition_width = sc.value("transition_width", 0.0);
      s.curves = sc.value("curves", 10);
      s.label = sc.value("label", 1);
      base.subclasses.push_back(std::move(s));
    }
  }
  base.validate();
  return base;
}

inline Json to_json(const WaveformSpec& s) {
  return Json{{"benchmark", "waveform"},
              {"curves_per_class", s.curves_per_class},
              {"merge", s.merge},
              {"noise_sd", s.noise_sd}};
}

inline WaveformSpec waveform_spec_from_json(const Json& j, WaveformSpec base = {}) {
  if (j.contains("curves_per_class")) base.curves_per_class = j.at("curves_per_class").get<int>();
  if (j.contains("merge")) base.merge = j.at("merge").get<bool>();
  if (j.contains("noise_sd")) base.noise_sd = j.at("noise_sd").get<double>();
  return base;
}

}  // namespace regimix
