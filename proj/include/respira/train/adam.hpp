#pragma once
#include <cmath>
#include <cstdint>
#include <unordered_map>

#include "respira/nn/model.hpp"

namespace respira::train {

// Adam with bias correction; beta1 0.9, beta2 0.999, eps 1e-8.
template <typename S>
class Adam {
public:
  explicit Adam(double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8)
      : beta1_(beta1), beta2_(beta2), eps_(eps) {}

  void step(nn::ParamSet<S>& params, const nn::Gradients<S>& grads, double lr) {
    ++t_;
    const double bc1 = 1.0 - std::pow(beta1_, t_);
    const double bc2 = 1.0 - std::pow(beta2_, t_);
    for (auto& e : params.entries) {
      if (!e.trainable) continue;
      auto git = grads.by_name.find(e.name);
      if (git == grads.by_name.end()) throw data_error("adam: missing gradient for " + e.name);
      auto& m = m_[e.name];
      auto& v = v_[e.name];
      if (m.size() != e.value.v.size()) m.assign(e.value.v.size(), 0.0);
      if (v.size() != e.value.v.size()) v.assign(e.value.v.size(), 0.0);
      const auto& g = git->second.v;
      for (size_t i = 0; i < g.size(); ++i) {
        double gd = static_cast<double>(g[i]);
        m[i] = beta1_ * m[i] + (1.0 - beta1_) * gd;
        v[i] = beta2_ * v[i] + (1.0 - beta2_) * gd * gd;
        double mhat = m[i] / bc1;
        double vhat = v[i] / bc2;
        e.value.v[i] -= static_cast<S>(lr * mhat / (std::sqrt(vhat) + eps_));
      }
    }
  }

  int64_t steps() const { return t_; }

private:
  double beta1_, beta2_, eps_;
  int64_t t_ = 0;
  std::unordered_map<std::string, std::vector<double>> m_, v_;
};

}  // namespace respira::train
