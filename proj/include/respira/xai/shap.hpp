#pragma once
#include <cmath>
#include <cstdint>
#include <functional>
#include <memory>
#include <vector>

#include "respira/core/error.hpp"
#include "respira/core/rng.hpp"
#include "respira/nn/model.hpp"
#include "respira/xai/attribution.hpp"

namespace respira::xai {

// Prediction over a full feature vector; masking semantics (mean imputation)
// live in the callers below.
using PredictFn = std::function<double(const std::vector<double>&)>;

constexpr int kShapExactLimit = 14;

struct ShapResult {
  std::vector<double> phi;
  std::vector<double> standard_error;  // sampled estimator only
  double f_x = 0.0;                    // f at the full input
  double f_null = 0.0;                 // f with everything masked
};

// Exact Shapley values by coalition enumeration with mean-imputation masking:
//   f(S) = f(z) with z_i = x_i if i in S else background_mean_i.
// Cost is 2^n evaluations; refuses n > 14.
inline ShapResult shap_exact(const PredictFn& f, const std::vector<double>& x,
                             const std::vector<double>& background_mean) {
  const int n = static_cast<int>(x.size());
  if (x.size() != background_mean.size())
    throw data_error("shap: background mean length mismatch");
  if (n > kShapExactLimit)
    throw data_error("shap_exact: refusing " + std::to_string(n) +
                     " features (exact enumeration is capped at 14)");
  if (n == 0) throw data_error("shap: empty feature vector");

  const uint32_t n_masks = 1u << n;
  std::vector<double> value(n_masks);
  std::vector<double> z(x.size());
  for (uint32_t mask = 0; mask < n_masks; ++mask) {
    for (int i = 0; i < n; ++i)
      z[static_cast<size_t>(i)] = (mask >> i) & 1u ? x[static_cast<size_t>(i)]
                                                   : background_mean[static_cast<size_t>(i)];
    value[mask] = f(z);
  }

  // w(s) = s! (n-1-s)! / n!
  std::vector<double> fact(static_cast<size_t>(n) + 1, 1.0);
  for (int i = 1; i <= n; ++i) fact[static_cast<size_t>(i)] = fact[static_cast<size_t>(i) - 1] * i;
  std::vector<double> weight(static_cast<size_t>(n), 0.0);
  for (int s = 0; s < n; ++s)
    weight[static_cast<size_t>(s)] =
        fact[static_cast<size_t>(s)] * fact[static_cast<size_t>(n - 1 - s)] / fact[static_cast<size_t>(n)];

  ShapResult out;
  out.phi.assign(static_cast<size_t>(n), 0.0);
  for (uint32_t mask = 0; mask < n_masks; ++mask) {
    int s = __builtin_popcount(mask);
    for (int i = 0; i < n; ++i) {
      if ((mask >> i) & 1u) continue;  // S must exclude i
      out.phi[static_cast<size_t>(i)] +=
          weight[static_cast<size_t>(s)] * (value[mask | (1u << i)] - value[mask]);
    }
  }
  out.f_x = value[n_masks - 1];
  out.f_null = value[0];
  return out;
}

// Permutation-sampling estimator over all features: each seeded permutation
// contributes one marginal per feature; per-feature Monte-Carlo standard
// errors are reported.
inline ShapResult shap_sampled(const PredictFn& f, const std::vector<double>& x,
                               const std::vector<double>& background_mean, int n_permutations,
                               Rng rng) {
  const int n = static_cast<int>(x.size());
  if (x.size() != background_mean.size())
    throw data_error("shap: background mean length mismatch");
  if (n_permutations < 100)
    throw data_error("shap_sampled: need at least 100 permutations");

  std::vector<double> sum(static_cast<size_t>(n), 0.0);
  std::vector<double> sum_sq(static_cast<size_t>(n), 0.0);
  std::vector<int> perm(static_cast<size_t>(n));
  for (int i = 0; i < n; ++i) perm[static_cast<size_t>(i)] = i;

  std::vector<double> z = background_mean;
  ShapResult out;
  out.f_null = f(background_mean);
  out.f_x = f(x);

  for (int p = 0; p < n_permutations; ++p) {
    Rng perm_rng = rng.derive("perm", static_cast<uint64_t>(p));
    perm_rng.shuffle(perm);
    z = background_mean;
    double prev = out.f_null;
    for (int k = 0; k < n; ++k) {
      int i = perm[static_cast<size_t>(k)];
      z[static_cast<size_t>(i)] = x[static_cast<size_t>(i)];
      double cur = f(z);
      double marginal = cur - prev;
      sum[static_cast<size_t>(i)] += marginal;
      sum_sq[static_cast<size_t>(i)] += marginal * marginal;
      prev = cur;
    }
  }

  out.phi.resize(static_cast<size_t>(n));
  out.standard_error.resize(static_cast<size_t>(n));
  for (int i = 0; i < n; ++i) {
    double mean = sum[static_cast<size_t>(i)] / n_permutations;
    out.phi[static_cast<size_t>(i)] = mean;
    double var = sum_sq[static_cast<size_t>(i)] / n_permutations - mean * mean;
    out.standard_error[static_cast<size_t>(i)] =
        std::sqrt(std::max(var, 0.0) / n_permutations);
  }
  return out;
}

// Predictor view of the model: target-class logit as a function of the
// handcrafted features, mel held fixed. The deep-branch embedding does not
// depend on the hand input, so it is computed once up front and every
// evaluation runs only the hand encoder + fusion + head.
template <typename S>
PredictFn hand_logit_predictor(nn::Model<S>& model, const nn::Tensor<S>& mel, int target_class) {
  const auto& cfg = model.config();
  if (!cfg.has_hand()) throw data_error("shap: variant has no handcrafted input");
  if (target_class < 0 || target_class >= cfg.n_classes)
    throw data_error("shap: target class out of range");

  auto context = std::make_shared<nn::Tensor<S>>();
  if (cfg.has_conv()) {
    nn::Tensor<S> zero_hand({1, cfg.hand_dim});
    nn::Trace<S> tr = model.forward(mel, zero_hand, nn::Mode::eval);
    *context = tr.context;
  }
  return [&model, context, target_class](const std::vector<double>& hand_values) {
    const auto& c = model.config();
    if (static_cast<int>(hand_values.size()) != c.hand_dim)
      throw data_error("shap predictor: feature width mismatch");
    nn::Tensor<S> hand({1, c.hand_dim});
    for (int i = 0; i < c.hand_dim; ++i)
      hand.v[static_cast<size_t>(i)] = static_cast<S>(hand_values[static_cast<size_t>(i)]);
    nn::Tensor<S> logits = model.logits_with_fixed_deep(*context, hand);
    return static_cast<double>(logits.v[static_cast<size_t>(target_class)]);
  };
}

}  // namespace respira::xai
