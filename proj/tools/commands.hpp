#pragma once

// Subcommands of the regimix tool. Each command reads its inputs, computes,
// and writes every output file of the run in one atomic batch.

#include <regimix/regimix.hpp>

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace regimix::cli {

namespace fs = std::filesystem;

enum ExitCode { kOk = 0, kInternal = 1, kConfig = 2, kData = 3, kNumerical = 4 };

struct RunConfig {
  std::string command;
  std::string data;
  std::string out;
  std::string model;

  std::string benchmark = "piecewise";
  bool merge = true;
  std::optional<int> per_class;
  std::optional<double> noise_sd;
  Json piecewise = Json::object();  // overrides of the default piecewise spec

  std::vector<std::string> variants{"fmda-mixrhlp"};
  std::vector<int> K{1};
  int R = 1;
  int p = 0;
  int spline_order = 4;
  int interior_knots = 10;
  EmOptions em;
  std::uint64_t seed = 1;
  int k_folds = 5;
  std::vector<int> K_range{1, 2};
  std::vector<int> R_range{1, 2};

  void validate() const {
    if (!(em.tol > 0.0)) throw ConfigError("tol must be > 0");
    if (em.n_restarts < 1) throw ConfigError("n_restarts must be >= 1");
    if (em.max_iter < 0) throw ConfigError("max_iter must be >= 0");
    if (k_folds < 2) throw ConfigError("k_folds must be >= 2");
    if (R < 1) throw ConfigError("R must be >= 1");
    if (p < 0) throw ConfigError("p must be >= 0");
    for (int k : K)
      if (k < 1) throw ConfigError("K must be >= 1");
    if (K.empty()) throw ConfigError("K needs at least one entry");
  }

  VariantConfig variant_config() const {
    VariantConfig c;
    c.K = K;
    c.R = R;
    c.p = p;
    c.spline_order = spline_order;
    c.interior_knots = interior_knots;
    c.em = em;
    c.em.seed = seed;
    return c;
  }
};

inline Json to_json(const RunConfig& c) {
  Json j;
  j["command"] = c.command;
  if (!c.data.empty()) j["data"] = c.data;
  if (!c.out.empty()) j["out"] = c.out;
  if (!c.model.empty()) j["model"] = c.model;
  if (c.command == "generate") {
    j["benchmark"] = c.benchmark;
    if (c.benchmark == "waveform") j["merge"] = c.merge;
    if (c.per_class) j["per_class"] = *c.per_class;
    if (c.noise_sd) j["noise_sd"] = *c.noise_sd;
    if (!c.piecewise.empty()) j["piecewise"] = c.piecewise;
  }
  if (c.command == "fit" || c.command == "evaluate" || c.command == "select") {
    j["variant"] = c.variants;
    j["K"] = c.K;
    j["R"] = c.R;
    j["p"] = c.p;
    j["spline_order"] = c.spline_order;
    j["interior_knots"] = c.interior_knots;
    j["em"] = regimix::to_json(c.em);
    j["em"].erase("seed");
  }
  if (c.command == "evaluate") j["k_folds"] = c.k_folds;
  if (c.command == "select") {
    j["K_range"] = c.K_range;
    j["R_range"] = c.R_range;
  }
  j["seed"] = c.seed;
  return j;
}

namespace detail {

template <typename T>
void take(const Json& j, const char* key, T& dst) {
  if (j.contains(key)) dst = j.at(key).get<T>();
}

template <typename T>
void take_list(const Json& j, const char* key, std::vector<T>& dst) {
  if (!j.contains(key)) return;
  const Json& v = j.at(key);
  dst = v.is_array() ? v.get<std::vector<T>>() : std::vector<T>{v.get<T>()};
}

}  // namespace detail

/// Applies a JSON config file; keys mirror the long flag names with '-'
/// written as '_'. EM settings may also sit under an "em" object.
inline void apply_config_file(RunConfig& c, const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path);
  Json j;
  try {
    j = Json::parse(in);
    using detail::take;
    take(j, "data", c.data);
    take(j, "out", c.out);
    take(j, "model", c.model);
    take(j, "benchmark", c.benchmark);
    take(j, "merge", c.merge);
    if (j.contains("per_class")) c.per_class = j.at("per_class").get<int>();
    if (j.contains("noise_sd")) c.noise_sd = j.at("noise_sd").get<double>();
    take(j, "piecewise", c.piecewise);
    detail::take_list(j, "variant", c.variants);
    detail::take_list(j, "K", c.K);
    take(j, "R", c.R);
    take(j, "p", c.p);
    take(j, "spline_order", c.spline_order);
    take(j, "interior_knots", c.interior_knots);
    take(j, "seed", c.seed);
    take(j, "k_folds", c.k_folds);
    detail::take_list(j, "K_range", c.K_range);
    detail::take_list(j, "R_range", c.R_range);
    const Json& em = j.contains("em") ? j.at("em") : j;
    take(em, "max_iter", c.em.max_iter);
    take(em, "tol", c.em.tol);
    take(em, "n_restarts", c.em.n_restarts);
    take(em, "irls_max_iter", c.em.irls_max_iter);
    take(em, "irls_tol", c.em.irls_tol);
    take(em, "init_slope_scale", c.em.init_slope_scale);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("invalid config file " + path + ": " + e.what());
  }
}

inline std::string dump(const Json& j) { return j.dump(2) + "\n"; }

inline Json manifest(const RunConfig& c, Json extra = Json::object()) {
  Json m;
  m["tool"] = "regimix";
  m["format_version"] = kFormatVersion;
  m["config"] = to_json(c);
  for (auto& [k, v] : extra.items()) m[k] = v;
  return m;
}

inline fs::path require_out(const RunConfig& c) {
  if (c.out.empty()) throw ConfigError("--out is required");
  return c.out;
}

inline LabeledCurveSet require_data(const RunConfig& c) {
  if (c.data.empty()) throw ConfigError("--data is required");
  return read_dataset(c.data);
}

inline ClassifierModel require_model(const RunConfig& c) {
  if (c.model.empty()) throw ConfigError("--model is required");
  std::ifstream in(c.model);
  if (!in) throw DataError("cannot open model file " + c.model);
  try {
    return classifier_from_json(Json::parse(in));
  } catch (const nlohmann::json::exception& e) {
    throw DataError("invalid model file " + c.model + ": " + e.what());
  }
}

inline Variant single_variant(const RunConfig& c) {
  if (c.variants.size() != 1) throw ConfigError("this command takes exactly one variant");
  return parse_variant(c.variants[0]);
}

// --- commands ---------------------------------------------------------------

inline void cmd_generate(const RunConfig& c) {
  const fs::path out = require_out(c);
  Json spec;
  const GeneratedSet gs = [&] {
    if (c.benchmark == "piecewise") {
      PiecewiseSpec s;
      try {
        s = piecewise_spec_from_json(c.piecewise);
      } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("invalid piecewise spec: ") + e.what());
      }
      if (c.noise_sd) s.noise_sd = *c.noise_sd;
      if (c.per_class)
        for (auto& sc : s.subclasses) sc.curves = *c.per_class;
      spec = to_json(s);
      return gen_piecewise(s, c.seed);
    }
    if (c.benchmark == "waveform") {
      WaveformSpec s;
      s.merge = c.merge;
      if (c.per_class) s.curves_per_class = *c.per_class;
      if (c.noise_sd) s.noise_sd = *c.noise_sd;
      spec = to_json(s);
      return gen_waveform(s, c.seed);
    }
    throw ConfigError("unknown benchmark '" + c.benchmark + "'");
  }();
  Json extra{{"spec", spec}, {"n", gs.data.n()}, {"m", gs.data.m()}, {"origin", gs.origin}};
  write_files_atomically(out, {{"grid.csv", grid_csv(gs.data.grid())},
                               {"curves.csv", curves_csv(gs.data)},
                               {"manifest.json", dump(manifest(c, extra))}});
}

inline Json fit_reports_json(const std::vector<FitReport>& reports) {
  Json a = Json::array();
  for (std::size_t g = 0; g < reports.size(); ++g) {
    Json r = regimix::to_json(reports[g]);
    r["class"] = g + 1;
    a.push_back(std::move(r));
  }
  return a;
}

inline void cmd_fit(const RunConfig& c) {
  const fs::path out = require_out(c);
  const LabeledCurveSet data = require_data(c);
  const Variant v = single_variant(c);
  const TrainResult res = train(data, v, c.variant_config());
  Json report{{"variant", std::string(variant_name(v))}, {"classes", fit_reports_json(res.reports)}};
  write_files_atomically(out, {{"model.json", dump(regimix::to_json(res.model))},
                               {"fit_report.json", dump(report)},
                               {"manifest.json", dump(manifest(c))}});
}

inline void cmd_classify(const RunConfig& c) {
  const fs::path out = require_out(c);
  const ClassifierModel model = require_model(c);
  const LabeledCurveSet data = require_data(c);
  if (!(data.grid() == *model.grid))
    throw DataError("dataset grid (fingerprint " + grid_fingerprint(data.grid()) +
                    ") differs from the model grid (fingerprint " + grid_fingerprint(*model.grid) + ")");
  std::string csv = "index,label";
  for (int g = 1; g <= model.num_classes(); ++g) csv += ",posterior_" + std::to_string(g);
  csv += '\n';
  for (Index i = 0; i < data.n(); ++i) {
    const Classification cl = classify_values(model, data.curve_view(i));
    csv += std::to_string(i) + "," + std::to_string(cl.label);
    for (Index g = 0; g < cl.posteriors.size(); ++g) csv += "," + format_double(cl.posteriors[g]);
    csv += '\n';
  }
  write_files_atomically(out, {{"predictions.csv", csv}, {"manifest.json", dump(manifest(c))}});
}

inline std::vector<Variant> variant_list(const RunConfig& c) {
  std::vector<Variant> vs;
  for (const auto& s : c.variants) {
    if (s == "all") {
      vs.assign(std::begin(kAllVariants), std::end(kAllVariants));
      return vs;
    }
    vs.push_back(parse_variant(s));
  }
  if (vs.empty()) throw ConfigError("no variant given");
  return vs;
}

inline void cmd_evaluate(const RunConfig& c) {
  const fs::path out = require_out(c);
  const LabeledCurveSet data = require_data(c);
  Json reports = Json::array();
  std::string summary = "variant,error_rate,inertia,seed,config_hash\n";
  for (Variant v : variant_list(c)) {
    const EvalReport rep = evaluate(data, v, c.variant_config(), c.k_folds, c.seed);
    reports.push_back(regimix::to_json(rep));
    summary += eval_summary_csv_row(rep);
  }
  write_files_atomically(out, {{"eval_report.json", dump(Json{{"reports", reports}})},
                               {"summary.csv", summary},
                               {"manifest.json", dump(manifest(c))}});
}

/// Runs the (K, R) grid search on every class; the selected per-class
/// densities form a MixRHLP classifier.
inline void cmd_select(const RunConfig& c) {
  const fs::path out = require_out(c);
  const LabeledCurveSet data = require_data(c);
  ClassifierModel model;
  model.variant = Variant::fmda_mixrhlp;
  model.basis = BasisSpec::polynomial(c.p);
  model.grid = data.grid_ptr();
  model.design = make_design(data.grid(), model.basis);
  model.priors.resize(data.num_classes());
  std::string table = "class,K,R,nu,loglik,bic,selected\n";
  Json chosen = Json::array();
  for (int g = 1; g <= data.num_classes(); ++g) {
    EmOptions em = c.em;
    em.seed = class_seed(c.seed, g);
    const ModelSelection sel = select_model(data.class_slice(g), c.K_range, c.R_range, c.p, em);
    for (std::size_t e = 0; e < sel.table.size(); ++e) {
      const BicEntry& b = sel.table[e];
      table += std::to_string(g) + "," + std::to_string(b.K) + "," + std::to_string(b.R) + "," + std::to_string(b.nu) +
               "," + format_double(b.loglik) + "," + format_double(b.bic) + "," + (e == sel.best_index ? "1" : "0") +
               "\n";
    }
    const BicEntry& best = sel.table[sel.best_index];
    chosen.push_back(Json{{"class", g}, {"K", best.K}, {"R", best.R}, {"bic", best.bic}});
    model.priors[g - 1] = static_cast<double>(data.class_size(g)) / static_cast<double>(data.n());
    model.class_models.push_back(sel.best.params);
  }
  write_files_atomically(out, {{"bic_table.csv", table},
                               {"model.json", dump(regimix::to_json(model))},
                               {"manifest.json", dump(manifest(c, Json{{"selected", chosen}}))}});
}

inline std::string matrix_csv(const std::vector<std::string>& header, const TimeGrid& grid, const MatrixXd& cols) {
  std::string s = "t";
  for (const auto& h : header) s += "," + h;
  s += '\n';
  for (Index j = 0; j < grid.size(); ++j) {
    s += format_double(grid[j]);
    for (Index c = 0; c < cols.cols(); ++c) s += "," + format_double(cols(j, c));
    s += '\n';
  }
  return s;
}

/// Mean curves and, for regime variants, regime probabilities per class and
/// cluster; hard cluster assignments of the dataset's curves within their
/// labeled class.
inline void cmd_export_plots(const RunConfig& c) {
  const fs::path out = require_out(c);
  const ClassifierModel model = require_model(c);
  const LabeledCurveSet data = require_data(c);
  if (!(data.grid() == *model.grid))
    throw DataError("dataset grid (fingerprint " + grid_fingerprint(data.grid()) +
                    ") differs from the model grid (fingerprint " + grid_fingerprint(*model.grid) + ")");
  std::vector<std::pair<std::string, std::string>> files;
  for (int g = 1; g <= model.num_classes(); ++g) {
    const MatrixXd means = class_mean_curves(model, g);
    std::vector<std::string> header;
    for (Index k = 0; k < means.rows(); ++k) header.push_back("cluster_" + std::to_string(k + 1));
    files.emplace_back("mean_curves_class" + std::to_string(g) + ".csv",
                       matrix_csv(header, *model.grid, means.transpose()));
    if (const auto* mp = std::get_if<MixRhlpParams>(&model.class_models[static_cast<std::size_t>(g - 1)])) {
      for (std::size_t k = 0; k < mp->clusters.size(); ++k) {
        const MatrixXd pi = regime_probabilities(mp->clusters[k].logistic, *model.grid);
        std::vector<std::string> rh;
        for (Index r = 0; r < pi.cols(); ++r) rh.push_back("regime_" + std::to_string(r + 1));
        files.emplace_back("regime_probs_class" + std::to_string(g) + "_cluster" + std::to_string(k + 1) + ".csv",
                           matrix_csv(rh, *model.grid, pi));
      }
    }
  }
  std::string assign = "index,label,cluster\n";
  for (Index i = 0; i < data.n(); ++i) {
    const int g = data.label(i);
    if (g > model.num_classes()) throw DataError("curve label outside the model's classes");
    assign += std::to_string(i) + "," + std::to_string(g) + "," +
              std::to_string(assigned_cluster(model, g, data.curve_view(i)) + 1) + "\n";
  }
  files.emplace_back("assignments.csv", assign);
  files.emplace_back("manifest.json", dump(manifest(c)));
  write_files_atomically(out, files);
}

// --- argument parsing -------------------------------------------------------

/// Parses argv, applies --config, then the flags given explicitly, and runs
/// the chosen subcommand. Returns the process exit code.
inline int run(int argc, const char* const* argv, std::ostream& err = std::cerr) {
  CLI::App app{"Curve classification and clustering with hidden logistic process regressions"};
  app.require_subcommand(1);
  RunConfig flags;
  std::string config_path;
  std::vector<std::pair<CLI::Option*, std::function<void(RunConfig&)>>> overrides;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", config_path, "JSON config file; flags override its entries");
    overrides.emplace_back(sub->add_option("--seed", flags.seed, "master seed"),
                           [&](RunConfig& c) { c.seed = flags.seed; });
    overrides.emplace_back(sub->add_option("--out", flags.out, "existing output directory"),
                           [&](RunConfig& c) { c.out = flags.out; });
  };
  auto add_data = [&](CLI::App* sub) {
    overrides.emplace_back(sub->add_option("--data", flags.data, "directory holding grid.csv and curves.csv"),
                           [&](RunConfig& c) { c.data = flags.data; });
  };
  auto add_model_file = [&](CLI::App* sub) {
    overrides.emplace_back(sub->add_option("--model", flags.model, "classifier JSON written by fit or select"),
                           [&](RunConfig& c) { c.model = flags.model; });
  };
  auto add_fit_options = [&](CLI::App* sub) {
    overrides.emplace_back(sub->add_option("--variant", flags.variants, "classifier variant")->delimiter(','),
                           [&](RunConfig& c) { c.variants = flags.variants; });
    overrides.emplace_back(sub->add_option("--K", flags.K, "clusters per class (one value, or one per class)")
                               ->delimiter(','),
                           [&](RunConfig& c) { c.K = flags.K; });
    overrides.emplace_back(sub->add_option("--R", flags.R, "regimes per cluster"),
                           [&](RunConfig& c) { c.R = flags.R; });
    overrides.emplace_back(sub->add_option("--p", flags.p, "polynomial degree"),
                           [&](RunConfig& c) { c.p = flags.p; });
    overrides.emplace_back(sub->add_option("--spline-order", flags.spline_order, "B-spline order"),
                           [&](RunConfig& c) { c.spline_order = flags.spline_order; });
    overrides.emplace_back(sub->add_option("--interior-knots", flags.interior_knots, "B-spline interior knots"),
                           [&](RunConfig& c) { c.interior_knots = flags.interior_knots; });
    overrides.emplace_back(sub->add_option("--max-iter", flags.em.max_iter, "EM iteration cap"),
                           [&](RunConfig& c) { c.em.max_iter = flags.em.max_iter; });
    overrides.emplace_back(sub->add_option("--tol", flags.em.tol, "EM log-likelihood increment threshold"),
                           [&](RunConfig& c) { c.em.tol = flags.em.tol; });
    overrides.emplace_back(sub->add_option("--n-restarts", flags.em.n_restarts, "EM restarts"),
                           [&](RunConfig& c) { c.em.n_restarts = flags.em.n_restarts; });
  };

  CLI::App* gen = app.add_subcommand("generate", "write a synthetic benchmark");
  add_common(gen);
  overrides.emplace_back(gen->add_option("--benchmark", flags.benchmark, "piecewise or waveform"),
                         [&](RunConfig& c) { c.benchmark = flags.benchmark; });
  overrides.emplace_back(gen->add_flag("--merge,!--no-merge", flags.merge, "merge waveform classes 1 and 2"),
                         [&](RunConfig& c) { c.merge = flags.merge; });
  int per_class = 0;
  double noise_sd = 0.0;
  overrides.emplace_back(gen->add_option("--per-class", per_class, "curves per (sub-)class"),
                         [&](RunConfig& c) { c.per_class = per_class; });
  overrides.emplace_back(gen->add_option("--noise-sd", noise_sd, "noise standard deviation"),
                         [&](RunConfig& c) { c.noise_sd = noise_sd; });

  CLI::App* fit = app.add_subcommand("fit", "train a classifier");
  add_common(fit);
  add_data(fit);
  add_fit_options(fit);

  CLI::App* cls = app.add_subcommand("classify", "MAP labels and posteriors for a dataset");
  add_common(cls);
  add_data(cls);
  add_model_file(cls);

  CLI::App* ev = app.add_subcommand("evaluate", "cross-validated error rate and intra-class inertia");
  add_common(ev);
  add_data(ev);
  add_fit_options(ev);
  overrides.emplace_back(ev->add_option("--k-folds", flags.k_folds, "number of folds"),
                         [&](RunConfig& c) { c.k_folds = flags.k_folds; });

  CLI::App* sel = app.add_subcommand("select", "BIC search over K and R for every class");
  add_common(sel);
  add_data(sel);
  add_fit_options(sel);
  overrides.emplace_back(sel->add_option("--K-range", flags.K_range, "candidate K values")->delimiter(','),
                         [&](RunConfig& c) { c.K_range = flags.K_range; });
  overrides.emplace_back(sel->add_option("--R-range", flags.R_range, "candidate R values")->delimiter(','),
                         [&](RunConfig& c) { c.R_range = flags.R_range; });

  CLI::App* exp = app.add_subcommand("export-plots", "CSV tables for mean curves, regimes and assignments");
  add_common(exp);
  add_data(exp);
  add_model_file(exp);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, std::cout, err);
    return code == 0 ? kOk : kConfig;
  }

  try {
    RunConfig c;
    c.command = app.get_subcommands().front()->get_name();
    if (!config_path.empty()) apply_config_file(c, config_path);
    for (auto& [opt, apply] : overrides)
      if (opt->count() > 0) apply(c);
    c.validate();
    if (c.command == "generate") cmd_generate(c);
    else if (c.command == "fit") cmd_fit(c);
    else if (c.command == "classify") cmd_classify(c);
    else if (c.command == "evaluate") cmd_evaluate(c);
    else if (c.command == "select") cmd_select(c);
    else cmd_export_plots(c);
    return kOk;
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << "\n";
    return kConfig;
  } catch (const DataError& e) {
    err << "data error: " << e.what() << "\n";
    return kData;
  } catch (const NumericalError& e) {
    err << "numerical failure: " << e.what() << "\n";
    return kNumerical;
  } catch (const fs::filesystem_error& e) {
    err << "data error: " << e.what() << "\n";
    return kData;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kInternal;
  }
}

}  // namespace regimix::cli
