// Generates the piecewise benchmark, trains the MixRHLP classifier and a
// single-polynomial baseline, and prints their cross-validated error rates
// and the regime switch points found for each cluster.

#include <regimix/regimix.hpp>

#include <cstdio>
#include <string>

int main() {
  using namespace regimix;
  const GeneratedSet gs = gen_piecewise(default_piecewise_spec(), 1);

  VariantConfig cfg;
  cfg.K = {3, 1};
  cfg.R = 3;
  cfg.p = 0;
  cfg.em.seed = 1;
  for (Variant v : {Variant::flda_pr, Variant::fmda_mixrhlp}) {
    VariantConfig c = cfg;
    if (v == Variant::flda_pr) c.p = 3;
    const CvResult cv = cv_error_rate(gs.data, v, c, 5, 1);
    std::printf("%-14s cv error %.3f\n", std::string(variant_name(v)).c_str(), cv.error_rate);
  }

  const ClassifierModel model = train(gs.data, Variant::fmda_mixrhlp, cfg).model;
  for (int g = 1; g <= model.num_classes(); ++g) {
    const auto& mp = std::get<MixRhlpParams>(model.class_models[static_cast<std::size_t>(g - 1)]);
    for (std::size_t k = 0; k < mp.clusters.size(); ++k) {
      const MatrixXd pi = regime_probabilities(mp.clusters[k].logistic, *model.grid);
      std::printf("class %d cluster %zu (alpha %.2f): switches at", g, k + 1, mp.alphas[static_cast<Index>(k)]);
      Index prev = -1;
      for (Index j = 0; j < pi.rows(); ++j) {
        Index r;
        pi.row(j).maxCoeff(&r);
        if (prev >= 0 && r != prev) std::printf(" t=%.3f", (*model.grid)[j]);
        prev = r;
      }
      std::printf("\n");
    }
  }
}
