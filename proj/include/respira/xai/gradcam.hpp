#pragma once
#include <algorithm>
#include <cmath>
#include <vector>

#include "respira/nn/model.hpp"
#include "respira/xai/attribution.hpp"

namespace respira::xai {

namespace detail {

// Bilinear resize (align-corners) of a row-major (h, w) map.
inline std::vector<float> bilinear_upsample(const std::vector<float>& src, int h, int w, int oh,
                                            int ow) {
  std::vector<float> dst(static_cast<size_t>(oh) * ow);
  const double sy = oh > 1 ? static_cast<double>(h - 1) / (oh - 1) : 0.0;
  const double sx = ow > 1 ? static_cast<double>(w - 1) / (ow - 1) : 0.0;
  for (int y = 0; y < oh; ++y) {
    double fy = y * sy;
    int y0 = static_cast<int>(fy);
    int y1 = std::min(y0 + 1, h - 1);
    double wy = fy - y0;
    for (int x = 0; x < ow; ++x) {
      double fx = x * sx;
      int x0 = static_cast<int>(fx);
      int x1 = std::min(x0 + 1, w - 1);
      double wx = fx - x0;
      double v00 = src[static_cast<size_t>(y0) * w + static_cast<size_t>(x0)];
      double v01 = src[static_cast<size_t>(y0) * w + static_cast<size_t>(x1)];
      double v10 = src[static_cast<size_t>(y1) * w + static_cast<size_t>(x0)];
      double v11 = src[static_cast<size_t>(y1) * w + static_cast<size_t>(x1)];
      dst[static_cast<size_t>(y) * ow + static_cast<size_t>(x)] = static_cast<float>(
          (1 - wy) * ((1 - wx) * v00 + wx * v01) + wy * ((1 - wx) * v10 + wx * v11));
    }
  }
  return dst;
}

}  // namespace detail

// Gradient-weighted class activation map over the last conv feature maps:
// channel weights are the spatial means of d(logit_c)/dA, the map is
// ReLU(sum_k alpha_k A_k), min-max normalized and bilinearly upsampled onto
// the mel input grid.
template <typename S>
AttributionMap grad_cam(nn::Model<S>& model, const nn::Tensor<S>& mel, const nn::Tensor<S>& hand,
                        int target_class) {
  const auto& cfg = model.config();
  if (!cfg.has_conv())
    throw data_error("grad_cam: unsupported for the HandcraftedOnly variant (no conv layers)");
  if (target_class < 0 || target_class >= cfg.n_classes)
    throw data_error("grad_cam: target class out of range");

  nn::Trace<S> tr = model.forward(mel, hand, nn::Mode::eval);
  nn::Tensor<S> dlogits(tr.logits.shape);
  dlogits.v[static_cast<size_t>(target_class)] = S(1);  // pre-softmax logit as the target
  nn::Gradients<S> g = model.backward(tr, dlogits);

  const nn::Tensor<S>& A = tr.conv_feature();
  const int mh = A.dim(1), tw = A.dim(2), ch = A.dim(3);
  const double z = static_cast<double>(mh) * tw;

  std::vector<double> alpha(static_cast<size_t>(ch), 0.0);
  for (int m = 0; m < mh; ++m)
    for (int t = 0; t < tw; ++t) {
      const S* gp = g.d_conv_feature.data() + ((static_cast<int64_t>(m) * tw) + t) * ch;
      for (int c = 0; c < ch; ++c) alpha[static_cast<size_t>(c)] += static_cast<double>(gp[c]) / z;
    }

  std::vector<float> raw(static_cast<size_t>(mh) * tw);
  for (int m = 0; m < mh; ++m)
    for (int t = 0; t < tw; ++t) {
      const S* ap = A.data() + ((static_cast<int64_t>(m) * tw) + t) * ch;
      double acc = 0.0;
      for (int c = 0; c < ch; ++c) acc += alpha[static_cast<size_t>(c)] * static_cast<double>(ap[c]);
      raw[static_cast<size_t>(m) * tw + static_cast<size_t>(t)] =
          static_cast<float>(std::max(acc, 0.0));
    }

  float lo = raw[0], hi = raw[0];
  for (float v : raw) {
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  if (hi > lo)
    for (float& v : raw) v = (v - lo) / (hi - lo);
  else
    std::fill(raw.begin(), raw.end(), 0.0f);

  AttributionMap out;
  out.method = "grad_cam";
  out.target_class = target_class;
  out.shape = {cfg.mel_bins, cfg.mel_frames};
  out.values = detail::bilinear_upsample(raw, mh, tw, cfg.mel_bins, cfg.mel_frames);
  out.baseline = "none";
  out.diagnostics["raw_map_max"] = hi;
  out.diagnostics["raw_map_min"] = lo;
  return out;
}

}  // namespace respira::xai
