#pragma once
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

#include "respira/nn/ops.hpp"
#include "respira/nn/tensor.hpp"

namespace respira::nn {

// Single-direction LSTM over (N, T, D) input, U units, zero initial state.
// Gate order in the packed 4U dimension is [input, forget, cell, output].
template <typename S>
struct LstmCache {
  int n = 0, t = 0, d = 0, u = 0;
  Tensor<S> i, f, g, o;   // post-activation gates, (N, T, U)
  Tensor<S> c, tanh_c;    // cell state and its tanh, (N, T, U)
  Tensor<S> h;            // hidden outputs, (N, T, U)
};

template <typename S>
S sigmoid(S x) {
  return S(1) / (S(1) + std::exp(-x));
}

// x may be traversed in reverse time order (reverse=true) while the cache is
// stored in traversal order; callers re-reverse when assembling output.
template <typename S>
void lstm_forward(const Tensor<S>& x, const Tensor<S>& wx, const Tensor<S>& wh,
                  const Tensor<S>& b, bool reverse, LstmCache<S>& cache) {
  const int n = x.dim(0), t = x.dim(1), d = x.dim(2);
  const int u = wh.dim(0);
  cache.n = n;
  cache.t = t;
  cache.d = d;
  cache.u = u;
  for (Tensor<S>* tt : {&cache.i, &cache.f, &cache.g, &cache.o, &cache.c, &cache.tanh_c, &cache.h})
    *tt = Tensor<S>({n, t, u});

  Tensor<S> gates({n, 4 * u});
  Tensor<S> h_prev({n, u}), c_prev({n, u});

  for (int step = 0; step < t; ++step) {
    const int src_t = reverse ? t - 1 - step : step;
    // gates = x_t . Wx + h_prev . Wh + b
    std::vector<S> xt(static_cast<size_t>(n) * d);
    for (int i = 0; i < n; ++i)
      std::copy_n(x.data() + (static_cast<int64_t>(i) * t + src_t) * d, d,
                  xt.data() + static_cast<int64_t>(i) * d);
    gemm(xt.data(), wx.data(), gates.data(), n, 4 * u, d);
    gemm(h_prev.data(), wh.data(), gates.data(), n, 4 * u, u, /*accumulate=*/true);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < 4 * u; ++j)
        gates.v[static_cast<size_t>(i) * 4 * u + static_cast<size_t>(j)] += b.v[static_cast<size_t>(j)];

    for (int i = 0; i < n; ++i) {
      const S* gp = gates.data() + static_cast<int64_t>(i) * 4 * u;
      int64_t off = (static_cast<int64_t>(i) * t + step) * u;
      for (int j = 0; j < u; ++j) {
        S iv = sigmoid(gp[j]);
        S fv = sigmoid(gp[u + j]);
        S gv = std::tanh(gp[2 * u + j]);
        S ov = sigmoid(gp[3 * u + j]);
        S cv = fv * c_prev.v[static_cast<size_t>(i) * u + static_cast<size_t>(j)] + iv * gv;
        S tc = std::tanh(cv);
        cache.i.v[static_cast<size_t>(off + j)] = iv;
        cache.f.v[static_cast<size_t>(off + j)] = fv;
        cache.g.v[static_cast<size_t>(off + j)] = gv;
        cache.o.v[static_cast<size_t>(off + j)] = ov;
        cache.c.v[static_cast<size_t>(off + j)] = cv;
        cache.tanh_c.v[static_cast<size_t>(off + j)] = tc;
        cache.h.v[static_cast<size_t>(off + j)] = ov * tc;
      }
    }
    for (int i = 0; i < n; ++i) {
      int64_t off = (static_cast<int64_t>(i) * t + step) * u;
      for (int j = 0; j < u; ++j) {
        h_prev.v[static_cast<size_t>(i) * u + static_cast<size_t>(j)] = cache.h.v[static_cast<size_t>(off + j)];
        c_prev.v[static_cast<size_t>(i) * u + static_cast<size_t>(j)] = cache.c.v[static_cast<size_t>(off + j)];
      }
    }
  }
}

// dh: gradient w.r.t. this direction's hidden outputs, in traversal order
// (same indexing as cache.h). Accumulates into dwx/dwh/db; writes dx in the
// original time order of x.
template <typename S>
void lstm_backward(const Tensor<S>& x, const Tensor<S>& wx, const Tensor<S>& wh,
                   const LstmCache<S>& cache, const Tensor<S>& dh, bool reverse, Tensor<S>& dx,
                   Tensor<S>& dwx, Tensor<S>& dwh, Tensor<S>& db) {
  const int n = cache.n, t = cache.t, d = cache.d, u = cache.u;
  if (dx.numel() != x.numel()) dx = Tensor<S>(x.shape);
  if (dwx.numel() != wx.numel()) dwx = Tensor<S>(wx.shape);
  if (dwh.numel() != wh.numel()) dwh = Tensor<S>(wh.shape);
  if (db.numel() != 4 * u) db = Tensor<S>({4 * u});

  Tensor<S> dh_next({n, u}), dc_next({n, u});
  Tensor<S> dgates({n, 4 * u});
  std::vector<S> xt(static_cast<size_t>(n) * d);
  std::vector<S> hprev(static_cast<size_t>(n) * u);
  Tensor<S> dxt({n, d});

  for (int step = t - 1; step >= 0; --step) {
    const int src_t = reverse ? t - 1 - step : step;
    for (int i = 0; i < n; ++i) {
      int64_t off = (static_cast<int64_t>(i) * t + step) * u;
      for (int j = 0; j < u; ++j) {
        size_t ij = static_cast<size_t>(i) * u + static_cast<size_t>(j);
        S dhv = dh.v[static_cast<size_t>(off + j)] + dh_next.v[ij];
        S ov = cache.o.v[static_cast<size_t>(off + j)];
        S tc = cache.tanh_c.v[static_cast<size_t>(off + j)];
        S dov = dhv * tc;
        S dcv = dhv * ov * (S(1) - tc * tc) + dc_next.v[ij];
        S iv = cache.i.v[static_cast<size_t>(off + j)];
        S fv = cache.f.v[static_cast<size_t>(off + j)];
        S gv = cache.g.v[static_cast<size_t>(off + j)];
        S c_prev = step > 0 ? cache.c.v[static_cast<size_t>(off + j - u)] : S(0);
        S div = dcv * gv;
        S dgv = dcv * iv;
        S dfv = dcv * c_prev;
        dc_next.v[ij] = dcv * fv;
        S* gp = dgates.data() + static_cast<int64_t>(i) * 4 * u;
        gp[j] = div * iv * (S(1) - iv);
        gp[u + j] = dfv * fv * (S(1) - fv);
        gp[2 * u + j] = dgv * (S(1) - gv * gv);
        gp[3 * u + j] = dov * ov * (S(1) - ov);
      }
    }

    // Parameter gradients: dWx += x_t^T dgates; dWh += h_{t-1}^T dgates
    for (int i = 0; i < n; ++i)
      std::copy_n(x.data() + (static_cast<int64_t>(i) * t + src_t) * d, d,
                  xt.data() + static_cast<int64_t>(i) * d);
    gemm_at_b(xt.data(), dgates.data(), dwx.data(), d, 4 * u, n, /*accumulate=*/true);
    if (step > 0) {
      for (int i = 0; i < n; ++i)
        std::copy_n(cache.h.data() + (static_cast<int64_t>(i) * t + step - 1) * u, u,
                    hprev.data() + static_cast<int64_t>(i) * u);
      gemm_at_b(hprev.data(), dgates.data(), dwh.data(), u, 4 * u, n, /*accumulate=*/true);
    }
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < 4 * u; ++j)
        db.v[static_cast<size_t>(j)] += dgates.v[static_cast<size_t>(i) * 4 * u + static_cast<size_t>(j)];

    // dx_t = dgates . Wx^T ; dh_prev = dgates . Wh^T
    gemm_a_bt(dgates.data(), wx.data(), dxt.data(), n, d, 4 * u);
    for (int i = 0; i < n; ++i) {
      S* dst = dx.data() + (static_cast<int64_t>(i) * t + src_t) * d;
      const S* src = dxt.data() + static_cast<int64_t>(i) * d;
      for (int j = 0; j < d; ++j) dst[j] += src[j];
    }
    gemm_a_bt(dgates.data(), wh.data(), dh_next.data(), n, u, 4 * u);
  }
}

}  // namespace respira::nn
