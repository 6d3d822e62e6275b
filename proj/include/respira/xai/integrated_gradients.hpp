#pragma once
#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "respira/core/error.hpp"
#include "respira/nn/model.hpp"
#include "respira/xai/attribution.hpp"

namespace respira::xai {

// Differentiable scalar field over a flat input vector.
template <typename S>
struct ScalarField {
  // Returns f(x); fills grad (same length as x) when grad != nullptr.
  std::function<double(const std::vector<S>&, std::vector<S>*)> eval;
};

// Riemann-midpoint approximation of the path integral from baseline to x:
//   IG_i = (x_i - x'_i) * (1/m) sum_k dF/dx_i at x' + (k+1/2)/m (x - x').
// The completeness gap |sum IG - (F(x) - F(x'))| is returned alongside.
template <typename S>
struct IgResult {
  std::vector<double> attributions;
  double completeness_gap = 0.0;
  double f_x = 0.0, f_baseline = 0.0;
};

template <typename S>
IgResult<S> integrated_gradients_core(const ScalarField<S>& f, const std::vector<S>& x,
                                      const std::vector<S>& baseline, int steps) {
  if (steps < 8) throw data_error("integrated gradients: need at least 8 steps");
  if (x.size() != baseline.size())
    throw data_error("integrated gradients: baseline shape mismatch");

  IgResult<S> out;
  out.attributions.assign(x.size(), 0.0);

  std::vector<S> point(x.size());
  std::vector<S> grad(x.size());
  for (int k = 0; k < steps; ++k) {
    double a = (k + 0.5) / steps;
    for (size_t i = 0; i < x.size(); ++i)
      point[i] = static_cast<S>(baseline[i] + a * (static_cast<double>(x[i]) - baseline[i]));
    (void)f.eval(point, &grad);
    for (size_t i = 0; i < x.size(); ++i) {
      double gv = static_cast<double>(grad[i]);
      if (!std::isfinite(gv))
        throw numeric_error("integrated gradients: non-finite gradient at step " +
                            std::to_string(k));
      out.attributions[i] += gv;
    }
  }
  double sum = 0.0;
  for (size_t i = 0; i < x.size(); ++i) {
    out.attributions[i] *= (static_cast<double>(x[i]) - static_cast<double>(baseline[i])) / steps;
    sum += out.attributions[i];
  }
  out.f_x = f.eval(x, nullptr);
  out.f_baseline = f.eval(baseline, nullptr);
  out.completeness_gap = std::abs(sum - (out.f_x - out.f_baseline));
  return out;
}

// Field view of the model: target-class logit as a function of the mel input
// with the handcrafted input held fixed.
template <typename S>
ScalarField<S> mel_logit_field(nn::Model<S>& model, const nn::Tensor<S>& hand, int target_class) {
  const auto& cfg = model.config();
  if (!cfg.has_conv())
    throw data_error("integrated gradients: variant has no mel input");
  if (target_class < 0 || target_class >= cfg.n_classes)
    throw data_error("integrated gradients: target class out of range");
  ScalarField<S> f;
  f.eval = [&model, hand, target_class](const std::vector<S>& flat, std::vector<S>* grad) {
    const auto& c = model.config();
    nn::Tensor<S> mel({1, c.mel_bins, c.mel_frames});
    mel.v = flat;
    nn::Trace<S> tr = model.forward(mel, hand, nn::Mode::eval);
    double value = static_cast<double>(tr.logits.v[static_cast<size_t>(target_class)]);
    if (grad) {
      nn::Tensor<S> dlogits(tr.logits.shape);
      dlogits.v[static_cast<size_t>(target_class)] = S(1);
      nn::Gradients<S> g = model.backward(tr, dlogits);
      *grad = g.d_mel.v;
    }
    return value;
  };
  return f;
}

// IG over the mel input against an explicit baseline (the silent-clip
// mel-spectrogram by default at the call sites).
template <typename S>
AttributionMap integrated_gradients(nn::Model<S>& model, const nn::Tensor<S>& mel,
                                    const nn::Tensor<S>& hand, const nn::Tensor<S>& baseline,
                                    int target_class, int steps,
                                    const std::string& baseline_name = "silent_clip_mel") {
  const auto& cfg = model.config();
  check_shape(baseline, mel.shape, "integrated gradients baseline");
  ScalarField<S> f = mel_logit_field(model, hand, target_class);
  IgResult<S> r = integrated_gradients_core(f, mel.v, baseline.v, steps);

  AttributionMap out;
  out.method = "integrated_gradients";
  out.target_class = target_class;
  out.shape = {cfg.mel_bins, cfg.mel_frames};
  out.values.resize(r.attributions.size());
  for (size_t i = 0; i < r.attributions.size(); ++i)
    out.values[i] = static_cast<float>(r.attributions[i]);
  out.baseline = baseline_name;
  out.diagnostics["completeness_gap"] = r.completeness_gap;
  out.diagnostics["f_x"] = r.f_x;
  out.diagnostics["f_baseline"] = r.f_baseline;
  out.diagnostics["steps"] = steps;
  return out;
}

}  // namespace respira::xai
