#pragma once

// Stratified k-fold misclassification rate and intra-class inertia.

#include <regimix/discriminant.hpp>
#include <regimix/random.hpp>

#include <vector>

namespace regimix {

using Folds = std::vector<std::vector<Index>>;

/// Stratified folds: each class is shuffled with its own sub-stream and dealt
/// round-robin, so per-class fold sizes differ by at most one. Indices inside
/// a fold are ascending.
inline Folds kfold_split(const LabeledCurveSet& data, int k, std::uint64_t seed) {
  if (k < 2) throw ConfigError("need at least 2 folds");
  for (int g = 1; g <= data.num_classes(); ++g)
    if (data.class_size(g) < k)
      throw ConfigError("class " + std::to_string(g) + " has fewer curves than folds");
  Folds folds(static_cast<std::size_t>(k));
  for (int g = 1; g <= data.num_classes(); ++g) {
    std::vector<Index> idx = data.class_indices(g);
    CounterRng rng(derive_seed(seed, {0xF01DULL, static_cast<std::uint64_t>(g)}));
    shuffle(idx, rng);
    for (std::size_t p = 0; p < idx.size(); ++p) folds[p % static_cast<std::size_t>(k)].push_back(idx[p]);
  }
  for (auto& f : folds) std::sort(f.begin(), f.end());
  return folds;
}

/// Sum of squared distances from each curve to its class mean curve; for
/// mixture variants the mean curve of the cluster with the highest
/// posterior membership is used.
inline double intra_class_inertia(const LabeledCurveSet& data, const ClassifierModel& model) {
  if (!(data.grid() == *model.grid)) throw DataError("data grid differs from the model grid");
  std::vector<MatrixXd> means;
  for (int g = 1; g <= model.num_classes(); ++g) means.push_back(class_mean_curves(model, g));
  double total = 0.0;
  for (Index i = 0; i < data.n(); ++i) {
    const int g = data.label(i);
    if (g > model.num_classes()) throw DataError("curve label outside the model's classes");
    const Index k = assigned_cluster(model, g, data.curve_view(i));
    total += (data.values().row(i) - means[static_cast<std::size_t>(g - 1)].row(k)).squaredNorm();
  }
  return total;
}

/// Diagnostic: every curve measured against every mean curve of its class.
inline double intra_class_inertia_all_clusters(const LabeledCurveSet& data, const ClassifierModel& model) {
  double total = 0.0;
  for (Index i = 0; i < data.n(); ++i) {
    const MatrixXd means = class_mean_curves(model, data.label(i));
    for (Index k = 0; k < means.rows(); ++k) total += (data.values().row(i) - means.row(k)).squaredNorm();
  }
  return total;
}

struct CvResult {
  std::vector<double> per_fold_rates;
  std::vector<Index> per_fold_errors;
  std::vector<Index> per_fold_sizes;
  double error_rate = 0.0;
};

inline std::uint64_t fold_seed(std::uint64_t master, std::size_t fold) {
  return derive_seed(master, {0x7EA1ULL, static_cast<std::uint64_t>(fold)});
}

/// Trains on the complement of each fold and classifies the held-out curves.
inline CvResult cv_error_rate(const LabeledCurveSet& data, Variant v, const VariantConfig& cfg, const Folds& folds,
                              std::uint64_t seed) {
  CvResult res;
  std::vector<char> held(static_cast<std::size_t>(data.n()));
  for (std::size_t f = 0; f < folds.size(); ++f) {
    std::fill(held.begin(), held.end(), 0);
    for (Index i : folds[f]) held[static_cast<std::size_t>(i)] = 1;
    std::vector<Index> train_idx;
    for (Index i = 0; i < data.n(); ++i)
      if (!held[static_cast<std::size_t>(i)]) train_idx.push_back(i);
    VariantConfig fold_cfg = cfg;
    fold_cfg.em.seed = fold_seed(seed, f);
    const ClassifierModel model = train(data.subset(train_idx), v, fold_cfg).model;
    Index errors = 0;
    for (Index i : folds[f])
      if (classify_values(model, data.curve_view(i)).label != data.label(i)) ++errors;
    res.per_fold_errors.push_back(errors);
    res.per_fold_sizes.push_back(static_cast<Index>(folds[f].size()));
    res.per_fold_rates.push_back(folds[f].empty() ? 0.0
                                                  : static_cast<double>(errors) / static_cast<double>(folds[f].size()));
  }
  double sum = 0.0;
  for (double r : res.per_fold_rates) sum += r;
  res.error_rate = res.per_fold_rates.empty() ? 0.0 : sum / static_cast<double>(res.per_fold_rates.size());
  return res;
}

inline CvResult cv_error_rate(const LabeledCurveSet& data, Variant v, const VariantConfig& cfg, int k,
                              std::uint64_t seed) {
  return cv_error_rate(data, v, cfg, kfold_split(data, k, seed), seed);
}

struct EvalReport {
  Variant variant = Variant::flda_pr;
  VariantConfig config;
  std::uint64_t seed = 0;
  int k_folds = 5;
  CvResult cv;
  double intra_class_inertia = 0.0;             // model trained on all curves
  double intra_class_inertia_all_clusters = 0.0;

  double error_rate() const { return cv.error_rate; }
};

/// Cross-validated error rate plus the inertia of a model trained on the full set.
inline EvalReport evaluate(const LabeledCurveSet& data, Variant v, const VariantConfig& cfg, int k,
                           std::uint64_t seed) {
  EvalReport rep;
  rep.variant = v;
  rep.config = cfg;
  rep.seed = seed;
  rep.k_folds = k;
  rep.cv = cv_error_rate(data, v, cfg, k, seed);
  VariantConfig full_cfg = cfg;
  full_cfg.em.seed = derive_seed(seed, {0xA11ULL});
  const ClassifierModel model = train(data, v, full_cfg).model;
  rep.intra_class_inertia = intra_class_inertia(data, model);
  rep.intra_class_inertia_all_clusters = intra_class_inertia_all_clusters(data, model);
  return rep;
}

}  // namespace regimix
