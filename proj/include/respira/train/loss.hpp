#pragma once
#include <cmath>
#include <cstdint>
#include <vector>

#include "respira/core/error.hpp"
#include "respira/nn/model.hpp"
#include "respira/nn/tensor.hpp"

namespace respira::train {

constexpr double kLogClamp = 1e-12;

template <typename S>
struct LossResult {
  double value = 0.0;
  nn::Tensor<S> dlogits;  // (N, C) gradient under mean reduction
};

// Label-smoothed categorical cross-entropy, mean over the batch:
//   -(1/N) sum_i sum_c [(1-eps) y_ic + eps/C] log p_ic
// dlogits is the fused softmax/CE gradient (p - t)/N.
template <typename S>
LossResult<S> smoothed_scce(const nn::Tensor<S>& probs, const std::vector<int>& labels,
                            double epsilon) {
  const int n = probs.dim(0), c = probs.dim(1);
  if (static_cast<int>(labels.size()) != n)
    throw data_error("loss: label count does not match batch");
  LossResult<S> out;
  out.dlogits = nn::Tensor<S>({n, c});
  const double uniform = epsilon / c;
  double total = 0.0;
  for (int i = 0; i < n; ++i) {
    if (labels[static_cast<size_t>(i)] < 0 || labels[static_cast<size_t>(i)] >= c)
      throw data_error("loss: label outside class range");
    for (int j = 0; j < c; ++j) {
      double t = uniform + (j == labels[static_cast<size_t>(i)] ? 1.0 - epsilon : 0.0);
      double p = static_cast<double>(probs.v[static_cast<size_t>(i) * c + static_cast<size_t>(j)]);
      total -= t * std::log(std::max(p, kLogClamp));
      out.dlogits.v[static_cast<size_t>(i) * c + static_cast<size_t>(j)] =
          static_cast<S>((p - t) / n);
    }
  }
  out.value = total / n;
  return out;
}

// L2 penalty over weight matrices/kernels only (entries flagged decay);
// batch-norm scale/shift, biases and running stats are excluded.
template <typename S>
double l2_penalty(const nn::ParamSet<S>& params, double lambda) {
  if (lambda == 0.0) return 0.0;
  double acc = 0.0;
  for (const auto& e : params.entries) {
    if (!e.decay) continue;
    for (S v : e.value.v) acc += static_cast<double>(v) * static_cast<double>(v);
  }
  return lambda * acc;
}

// Adds d(lambda * ||W||^2)/dW = 2 lambda W to the gradients in place.
template <typename S>
void add_l2_gradient(const nn::ParamSet<S>& params, double lambda, nn::Gradients<S>& grads) {
  if (lambda == 0.0) return;
  for (const auto& e : params.entries) {
    if (!e.decay) continue;
    auto& g = grads.at(e.name);
    for (size_t i = 0; i < g.v.size(); ++i)
      g.v[i] += static_cast<S>(2.0 * lambda) * e.value.v[i];
  }
}

// Global-norm gradient clipping; returns the pre-clip norm.
template <typename S>
double clip_global_norm(const nn::ParamSet<S>& params, nn::Gradients<S>& grads, double max_norm) {
  double sq = 0.0;
  for (const auto& e : params.entries) {
    if (!e.trainable) continue;
    const auto& g = grads.at(e.name);
    for (S v : g.v) sq += static_cast<double>(v) * static_cast<double>(v);
  }
  double norm = std::sqrt(sq);
  if (norm > max_norm && norm > 0.0) {
    S scale = static_cast<S>(max_norm / norm);
    for (const auto& e : params.entries) {
      if (!e.trainable) continue;
      for (S& v : grads.at(e.name).v) v *= scale;
    }
  }
  return norm;
}

}  // namespace respira::train
