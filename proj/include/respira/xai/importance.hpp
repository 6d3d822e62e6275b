#pragma once
#include <algorithm>
#include <string>
#include <vector>

#include "respira/dsp/handcrafted.hpp"
#include "respira/xai/shap.hpp"

namespace respira::xai {

struct FeatureImportance {
  std::string name;
  int index = 0;
  double mean_abs_phi = 0.0;
};

// Mean |phi| of the handcrafted features across sampled inputs, targeting
// each sample's predicted class; returned ranked descending.
template <typename S>
std::vector<FeatureImportance> global_importance(
    nn::Model<S>& model, const std::vector<nn::Tensor<S>>& mels,
    const std::vector<std::vector<double>>& hands, const std::vector<double>& background_mean,
    int n_permutations, Rng rng) {
  if (mels.size() != hands.size()) throw data_error("global_importance: input count mismatch");
  if (mels.size() < 10) throw data_error("global_importance: need at least 10 samples");
  const auto& cfg = model.config();

  std::vector<double> acc(static_cast<size_t>(cfg.hand_dim), 0.0);
  for (size_t s = 0; s < mels.size(); ++s) {
    // Predicted class of the full input is the attribution target.
    nn::Tensor<S> hand({1, cfg.hand_dim});
    for (int i = 0; i < cfg.hand_dim; ++i)
      hand.v[static_cast<size_t>(i)] = static_cast<S>(hands[s][static_cast<size_t>(i)]);
    nn::Trace<S> tr = model.forward(mels[s], hand, nn::Mode::eval);
    int target = 0;
    for (int c = 1; c < cfg.n_classes; ++c)
      if (tr.probs.v[static_cast<size_t>(c)] > tr.probs.v[static_cast<size_t>(target)]) target = c;

    PredictFn f = hand_logit_predictor(model, mels[s], target);
    ShapResult r = shap_sampled(f, hands[s], background_mean, n_permutations,
                                rng.derive("sample", static_cast<uint64_t>(s)));
    for (int i = 0; i < cfg.hand_dim; ++i)
      acc[static_cast<size_t>(i)] += std::abs(r.phi[static_cast<size_t>(i)]);
  }

  std::vector<FeatureImportance> out;
  const auto& names = dsp::handcrafted_feature_names();
  for (int i = 0; i < cfg.hand_dim; ++i) {
    FeatureImportance fi;
    fi.index = i;
    fi.name = i < static_cast<int>(names.size()) ? names[static_cast<size_t>(i)]
                                                 : "feature_" + std::to_string(i);
    fi.mean_abs_phi = acc[static_cast<size_t>(i)] / static_cast<double>(mels.size());
    out.push_back(std::move(fi));
  }
  std::stable_sort(out.begin(), out.end(), [](const FeatureImportance& a, const FeatureImportance& b) {
    return a.mean_abs_phi > b.mean_abs_phi;
  });
  return out;
}

}  // namespace respira::xai
