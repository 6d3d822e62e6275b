#pragma once
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

#include "respira/core/parallel.hpp"
#include "respira/core/rng.hpp"
#include "respira/nn/tensor.hpp"

namespace respira::nn {

// ---------------------------------------------------------------------------
// GEMM: C (MxN) += or = A (MxK) . B (KxN), all row-major. i-k-j ordering keeps
// the inner loop contiguous on B and C; rows are partitioned across workers,
// so results are bit-identical for any worker count.
// ---------------------------------------------------------------------------
template <typename S>
void gemm(const S* a, const S* b, S* c, int64_t m, int64_t n, int64_t k, bool accumulate = false) {
  auto row_job = [&](int64_t i) {
    S* crow = c + i * n;
    if (!accumulate)
      for (int64_t j = 0; j < n; ++j) crow[j] = S(0);
    const S* arow = a + i * k;
    for (int64_t p = 0; p < k; ++p) {
      S av = arow[p];
      if (av == S(0)) continue;
      const S* brow = b + p * n;
      for (int64_t j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  };
  if (m * n * k > (1 << 18) && thread_count() > 1)
    parallel_for(m, row_job);
  else
    for (int64_t i = 0; i < m; ++i) row_job(i);
}

// C (MxN) = A^T (stored KxM) . B (KxN)
template <typename S>
void gemm_at_b(const S* a, const S* b, S* c, int64_t m, int64_t n, int64_t k,
               bool accumulate = false) {
  if (!accumulate)
    for (int64_t i = 0; i < m * n; ++i) c[i] = S(0);
  for (int64_t p = 0; p < k; ++p) {
    const S* arow = a + p * m;
    const S* brow = b + p * n;
    for (int64_t i = 0; i < m; ++i) {
      S av = arow[i];
      if (av == S(0)) continue;
      S* crow = c + i * n;
      for (int64_t j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
}

// C (MxN) = A (MxK) . B^T (stored NxK)
template <typename S>
void gemm_a_bt(const S* a, const S* b, S* c, int64_t m, int64_t n, int64_t k,
               bool accumulate = false) {
  auto row_job = [&](int64_t i) {
    const S* arow = a + i * k;
    S* crow = c + i * n;
    for (int64_t j = 0; j < n; ++j) {
      const S* brow = b + j * k;
      S acc = accumulate ? crow[j] : S(0);
      for (int64_t p = 0; p < k; ++p) acc += arow[p] * brow[p];
      crow[j] = acc;
    }
  };
  if (m * n * k > (1 << 18) && thread_count() > 1)
    parallel_for(m, row_job);
  else
    for (int64_t i = 0; i < m; ++i) row_job(i);
}

// ---------------------------------------------------------------------------
// Conv2D, 'same' padding, stride 1, odd kernel. Layout (N, H, W, C).
// Kernel (kh, kw, Cin, Cout) row-major doubles as the im2col weight matrix.
// ---------------------------------------------------------------------------
template <typename S>
struct Conv2dShape {
  int n, h, w, cin, cout, k;
};

template <typename S>
void im2col(const S* x, int h, int w, int cin, int k, S* cols) {
  // cols: (h*w) rows x (k*k*cin) columns
  const int pad = k / 2;
  int64_t row = 0;
  for (int y = 0; y < h; ++y) {
    for (int xw = 0; xw < w; ++xw, ++row) {
      S* dst = cols + row * (static_cast<int64_t>(k) * k * cin);
      for (int dy = 0; dy < k; ++dy) {
        int sy = y + dy - pad;
        for (int dx = 0; dx < k; ++dx) {
          int sx = xw + dx - pad;
          if (sy < 0 || sy >= h || sx < 0 || sx >= w) {
            for (int c = 0; c < cin; ++c) *dst++ = S(0);
          } else {
            const S* src = x + (static_cast<int64_t>(sy) * w + sx) * cin;
            for (int c = 0; c < cin; ++c) *dst++ = src[c];
          }
        }
      }
    }
  }
}

template <typename S>
void col2im_add(const S* cols, int h, int w, int cin, int k, S* dx) {
  const int pad = k / 2;
  int64_t row = 0;
  for (int y = 0; y < h; ++y) {
    for (int xw = 0; xw < w; ++xw, ++row) {
      const S* src = cols + row * (static_cast<int64_t>(k) * k * cin);
      for (int dy = 0; dy < k; ++dy) {
        int sy = y + dy - pad;
        for (int dx_ = 0; dx_ < k; ++dx_) {
          int sx = xw + dx_ - pad;
          if (sy < 0 || sy >= h || sx < 0 || sx >= w) {
            src += cin;
          } else {
            S* dst = dx + (static_cast<int64_t>(sy) * w + sx) * cin;
            for (int c = 0; c < cin; ++c) dst[c] += *src++;
          }
        }
      }
    }
  }
}

// y (N,H,W,Cout) = conv(x (N,H,W,Cin), kernel) + bias
template <typename S>
void conv2d_forward(const Tensor<S>& x, const Tensor<S>& kernel, const Tensor<S>& bias,
                    Tensor<S>& y) {
  const int n = x.dim(0), h = x.dim(1), w = x.dim(2), cin = x.dim(3);
  const int k = kernel.dim(0), cout = kernel.dim(3);
  y = Tensor<S>({n, h, w, cout});
  const int64_t patch = static_cast<int64_t>(k) * k * cin;
  const int64_t hw = static_cast<int64_t>(h) * w;
  std::vector<S> cols(static_cast<size_t>(hw * patch));
  for (int i = 0; i < n; ++i) {
    im2col(x.data() + static_cast<int64_t>(i) * hw * cin, h, w, cin, k, cols.data());
    gemm(cols.data(), kernel.data(), y.data() + static_cast<int64_t>(i) * hw * cout, hw, cout,
         patch);
  }
  for (int i = 0; i < n; ++i) {
    S* yp = y.data() + static_cast<int64_t>(i) * hw * cout;
    for (int64_t r = 0; r < hw; ++r)
      for (int c = 0; c < cout; ++c) yp[r * cout + c] += bias.v[static_cast<size_t>(c)];
  }
}

template <typename S>
void conv2d_backward(const Tensor<S>& x, const Tensor<S>& kernel, const Tensor<S>& dy,
                     Tensor<S>& dx, Tensor<S>& dkernel, Tensor<S>& dbias) {
  const int n = x.dim(0), h = x.dim(1), w = x.dim(2), cin = x.dim(3);
  const int k = kernel.dim(0), cout = kernel.dim(3);
  dx = Tensor<S>({n, h, w, cin});
  dkernel = Tensor<S>(kernel.shape);
  dbias = Tensor<S>({cout});
  const int64_t patch = static_cast<int64_t>(k) * k * cin;
  const int64_t hw = static_cast<int64_t>(h) * w;
  std::vector<S> cols(static_cast<size_t>(hw * patch));
  std::vector<S> dcols(static_cast<size_t>(hw * patch));
  for (int i = 0; i < n; ++i) {
    const S* dyp = dy.data() + static_cast<int64_t>(i) * hw * cout;
    im2col(x.data() + static_cast<int64_t>(i) * hw * cin, h, w, cin, k, cols.data());
    // dK += cols^T . dy
    gemm_at_b(cols.data(), dyp, dkernel.data(), patch, cout, hw, /*accumulate=*/true);
    // dcols = dy . K^T
    gemm_a_bt(dyp, kernel.data(), dcols.data(), hw, patch, cout);
    col2im_add(dcols.data(), h, w, cin, k, dx.data() + static_cast<int64_t>(i) * hw * cin);
    for (int64_t r = 0; r < hw; ++r)
      for (int c = 0; c < cout; ++c) dbias.v[static_cast<size_t>(c)] += dyp[r * cout + c];
  }
}

// ---------------------------------------------------------------------------
// Batch norm over leading axes (per channel/feature). Train mode uses biased
// batch statistics and updates running stats in place with momentum 0.9.
// ---------------------------------------------------------------------------
constexpr double kBnEps = 1e-5;
constexpr double kBnMomentum = 0.9;

template <typename S>
struct BnCache {
  Tensor<S> xhat;
  std::vector<S> mean, invstd;
};

// x viewed as (rows, channels); rows = N*H*W for conv maps, N for vectors.
template <typename S>
void batchnorm_forward(const Tensor<S>& x, int channels, const Tensor<S>& gamma,
                       const Tensor<S>& beta, Tensor<S>& run_mean, Tensor<S>& run_var,
                       bool train, Tensor<S>& y, BnCache<S>* cache) {
  const int64_t rows = x.numel() / channels;
  y = Tensor<S>(x.shape);
  std::vector<S> mean(static_cast<size_t>(channels), S(0));
  std::vector<S> var(static_cast<size_t>(channels), S(0));
  if (train) {
    for (int64_t r = 0; r < rows; ++r) {
      const S* xp = x.data() + r * channels;
      for (int c = 0; c < channels; ++c) mean[static_cast<size_t>(c)] += xp[c];
    }
    for (int c = 0; c < channels; ++c) mean[static_cast<size_t>(c)] /= static_cast<S>(rows);
    for (int64_t r = 0; r < rows; ++r) {
      const S* xp = x.data() + r * channels;
      for (int c = 0; c < channels; ++c) {
        S d = xp[c] - mean[static_cast<size_t>(c)];
        var[static_cast<size_t>(c)] += d * d;
      }
    }
    for (int c = 0; c < channels; ++c) var[static_cast<size_t>(c)] /= static_cast<S>(rows);
    for (int c = 0; c < channels; ++c) {
      run_mean.v[static_cast<size_t>(c)] = static_cast<S>(kBnMomentum) * run_mean.v[static_cast<size_t>(c)] +
                                           static_cast<S>(1.0 - kBnMomentum) * mean[static_cast<size_t>(c)];
      run_var.v[static_cast<size_t>(c)] = static_cast<S>(kBnMomentum) * run_var.v[static_cast<size_t>(c)] +
                                          static_cast<S>(1.0 - kBnMomentum) * var[static_cast<size_t>(c)];
    }
  } else {
    for (int c = 0; c < channels; ++c) {
      mean[static_cast<size_t>(c)] = run_mean.v[static_cast<size_t>(c)];
      var[static_cast<size_t>(c)] = run_var.v[static_cast<size_t>(c)];
    }
  }
  std::vector<S> invstd(static_cast<size_t>(channels));
  for (int c = 0; c < channels; ++c)
    invstd[static_cast<size_t>(c)] = S(1) / std::sqrt(var[static_cast<size_t>(c)] + static_cast<S>(kBnEps));

  for (int64_t r = 0; r < rows; ++r) {
    const S* xp = x.data() + r * channels;
    S* yp = y.data() + r * channels;
    for (int c = 0; c < channels; ++c) {
      S xh = (xp[c] - mean[static_cast<size_t>(c)]) * invstd[static_cast<size_t>(c)];
      yp[c] = gamma.v[static_cast<size_t>(c)] * xh + beta.v[static_cast<size_t>(c)];
    }
  }
  if (cache) {
    cache->mean = mean;
    cache->invstd = invstd;
    cache->xhat = Tensor<S>(x.shape);
    for (int64_t r = 0; r < rows; ++r) {
      const S* xp = x.data() + r * channels;
      S* hp = cache->xhat.data() + r * channels;
      for (int c = 0; c < channels; ++c)
        hp[c] = (xp[c] - mean[static_cast<size_t>(c)]) * invstd[static_cast<size_t>(c)];
    }
  }
}

// Backward through train-mode batch statistics.
template <typename S>
void batchnorm_backward(const BnCache<S>& cache, int channels, const Tensor<S>& gamma,
                        const Tensor<S>& dy, Tensor<S>& dx, Tensor<S>& dgamma, Tensor<S>& dbeta) {
  const int64_t rows = dy.numel() / channels;
  dx = Tensor<S>(dy.shape);
  dgamma = Tensor<S>({channels});
  dbeta = Tensor<S>({channels});

  std::vector<S> sum_dy(static_cast<size_t>(channels), S(0));
  std::vector<S> sum_dy_xhat(static_cast<size_t>(channels), S(0));
  for (int64_t r = 0; r < rows; ++r) {
    const S* dyp = dy.data() + r * channels;
    const S* hp = cache.xhat.data() + r * channels;
    for (int c = 0; c < channels; ++c) {
      sum_dy[static_cast<size_t>(c)] += dyp[c];
      sum_dy_xhat[static_cast<size_t>(c)] += dyp[c] * hp[c];
    }
  }
  for (int c = 0; c < channels; ++c) {
    dgamma.v[static_cast<size_t>(c)] = sum_dy_xhat[static_cast<size_t>(c)];
    dbeta.v[static_cast<size_t>(c)] = sum_dy[static_cast<size_t>(c)];
  }
  const S inv_rows = S(1) / static_cast<S>(rows);
  for (int64_t r = 0; r < rows; ++r) {
    const S* dyp = dy.data() + r * channels;
    const S* hp = cache.xhat.data() + r * channels;
    S* dxp = dx.data() + r * channels;
    for (int c = 0; c < channels; ++c) {
      size_t cc = static_cast<size_t>(c);
      S g = gamma.v[cc] * cache.invstd[cc];
      dxp[c] = g * (dyp[c] - inv_rows * sum_dy[cc] - inv_rows * hp[c] * sum_dy_xhat[cc]);
    }
  }
}

// Eval-mode backward: y = gamma*(x-rm)*rinv + beta is elementwise affine.
template <typename S>
void batchnorm_backward_eval(int channels, const Tensor<S>& gamma, const Tensor<S>& run_var,
                             const BnCache<S>& cache, const Tensor<S>& dy, Tensor<S>& dx,
                             Tensor<S>& dgamma, Tensor<S>& dbeta) {
  (void)run_var;
  const int64_t rows = dy.numel() / channels;
  dx = Tensor<S>(dy.shape);
  dgamma = Tensor<S>({channels});
  dbeta = Tensor<S>({channels});
  for (int64_t r = 0; r < rows; ++r) {
    const S* dyp = dy.data() + r * channels;
    const S* hp = cache.xhat.data() + r * channels;
    S* dxp = dx.data() + r * channels;
    for (int c = 0; c < channels; ++c) {
      size_t cc = static_cast<size_t>(c);
      dgamma.v[cc] += dyp[c] * hp[c];
      dbeta.v[cc] += dyp[c];
      dxp[c] = dyp[c] * gamma.v[cc] * cache.invstd[cc];
    }
  }
}

// ---------------------------------------------------------------------------
// ReLU / dropout / max-pool
// ---------------------------------------------------------------------------
template <typename S>
void relu_forward(Tensor<S>& x) {
  for (auto& v : x.v)
    if (v < S(0)) v = S(0);
}

template <typename S>
void relu_backward(const Tensor<S>& y_post, Tensor<S>& dy) {
  for (size_t i = 0; i < dy.v.size(); ++i)
    if (y_post.v[i] <= S(0)) dy.v[i] = S(0);
}

// Inverted dropout; mask holds 0 or 1/(1-rate).
template <typename S>
void dropout_forward(Tensor<S>& x, double rate, Rng& rng, Tensor<S>& mask) {
  mask = Tensor<S>(x.shape);
  if (rate <= 0.0) {
    mask.fill(S(1));
    return;
  }
  const S keep_scale = static_cast<S>(1.0 / (1.0 - rate));
  for (size_t i = 0; i < x.v.size(); ++i) {
    bool keep = rng.uniform() >= rate;
    mask.v[i] = keep ? keep_scale : S(0);
    x.v[i] *= mask.v[i];
  }
}

template <typename S>
void dropout_backward(const Tensor<S>& mask, Tensor<S>& dy) {
  for (size_t i = 0; i < dy.v.size(); ++i) dy.v[i] *= mask.v[i];
}

// 2x2 max pool, floor semantics: trailing odd row/column is dropped.
template <typename S>
void maxpool2_forward(const Tensor<S>& x, Tensor<S>& y, std::vector<int32_t>& argmax) {
  const int n = x.dim(0), h = x.dim(1), w = x.dim(2), c = x.dim(3);
  const int ho = h / 2, wo = w / 2;
  y = Tensor<S>({n, ho, wo, c});
  argmax.assign(static_cast<size_t>(y.numel()), 0);
  for (int i = 0; i < n; ++i)
    for (int yo = 0; yo < ho; ++yo)
      for (int xo = 0; xo < wo; ++xo)
        for (int ch = 0; ch < c; ++ch) {
          int64_t best_idx = -1;
          S best = S(0);
          for (int dy = 0; dy < 2; ++dy)
            for (int dx = 0; dx < 2; ++dx) {
              int64_t idx = ((static_cast<int64_t>(i) * h + (yo * 2 + dy)) * w + (xo * 2 + dx)) * c + ch;
              if (best_idx < 0 || x.v[static_cast<size_t>(idx)] > best) {
                best = x.v[static_cast<size_t>(idx)];
                best_idx = idx;
              }
            }
          int64_t oidx = ((static_cast<int64_t>(i) * ho + yo) * wo + xo) * c + ch;
          y.v[static_cast<size_t>(oidx)] = best;
          argmax[static_cast<size_t>(oidx)] = static_cast<int32_t>(best_idx);
        }
}

template <typename S>
void maxpool2_backward(const std::vector<int32_t>& argmax, const Tensor<S>& dy,
                       const std::vector<int>& x_shape, Tensor<S>& dx) {
  dx = Tensor<S>(x_shape);
  for (size_t i = 0; i < dy.v.size(); ++i)
    dx.v[static_cast<size_t>(argmax[i])] += dy.v[i];
}

// ---------------------------------------------------------------------------
// Dense: y (N,Dout) = x (N,Din) . W (Din,Dout) + b
// ---------------------------------------------------------------------------
template <typename S>
void dense_forward(const Tensor<S>& x, const Tensor<S>& w, const Tensor<S>& b, Tensor<S>& y) {
  const int n = x.dim(0), din = x.dim(1), dout = w.dim(1);
  y = Tensor<S>({n, dout});
  gemm(x.data(), w.data(), y.data(), n, dout, din);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < dout; ++j) y.v[static_cast<size_t>(i) * dout + static_cast<size_t>(j)] += b.v[static_cast<size_t>(j)];
}

template <typename S>
void dense_backward(const Tensor<S>& x, const Tensor<S>& w, const Tensor<S>& dy, Tensor<S>& dx,
                    Tensor<S>& dw, Tensor<S>& db) {
  const int n = x.dim(0), din = x.dim(1), dout = w.dim(1);
  dx = Tensor<S>({n, din});
  dw = Tensor<S>(w.shape);
  db = Tensor<S>({dout});
  gemm_a_bt(dy.data(), w.data(), dx.data(), n, din, dout);
  gemm_at_b(x.data(), dy.data(), dw.data(), din, dout, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < dout; ++j) db.v[static_cast<size_t>(j)] += dy.v[static_cast<size_t>(i) * dout + static_cast<size_t>(j)];
}

// Row-wise softmax with max subtraction.
template <typename S>
void softmax_rows(const Tensor<S>& logits, Tensor<S>& probs) {
  const int n = logits.dim(0), c = logits.dim(1);
  probs = Tensor<S>(logits.shape);
  for (int i = 0; i < n; ++i) {
    const S* lp = logits.data() + static_cast<int64_t>(i) * c;
    S* pp = probs.data() + static_cast<int64_t>(i) * c;
    S mx = lp[0];
    for (int j = 1; j < c; ++j) mx = std::max(mx, lp[j]);
    S sum = S(0);
    for (int j = 0; j < c; ++j) {
      pp[j] = std::exp(lp[j] - mx);
      sum += pp[j];
    }
    for (int j = 0; j < c; ++j) pp[j] /= sum;
  }
}

}  // namespace respira::nn
