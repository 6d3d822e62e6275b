#pragma once
#include <cmath>
#include <cstdint>
#include <vector>

#include "respira/core/error.hpp"

namespace respira::audio {

namespace detail {

inline double bessel_i0(double x) {
  // Series converges quickly for the argument range a Kaiser window needs.
  double sum = 1.0, term = 1.0;
  double half = 0.5 * x;
  for (int k = 1; k < 64; ++k) {
    term *= (half / k) * (half / k);
    sum += term;
    if (term < 1e-18 * sum) break;
  }
  return sum;
}

// Windowed-sinc interpolation kernel h(t) = sinc(t) * kaiser(t / half_taps),
// tabulated on [0, half_taps] and read back with linear interpolation.
struct SincKernel {
  static constexpr int kHalfTaps = 32;       // 64-tap kernel at unit spacing
  static constexpr int kTableDensity = 512;  // samples per unit of t
  static constexpr double kBeta = 8.6;

  std::vector<double> table;

  SincKernel() {
    const double inv_i0 = 1.0 / bessel_i0(kBeta);
    table.resize(kHalfTaps * kTableDensity + 2);
    for (size_t i = 0; i < table.size(); ++i) {
      double t = static_cast<double>(i) / kTableDensity;
      double x = t / kHalfTaps;
      if (x >= 1.0) {
        table[i] = 0.0;
        continue;
      }
      double window = bessel_i0(kBeta * std::sqrt(1.0 - x * x)) * inv_i0;
      double s = (t == 0.0) ? 1.0
                            : std::sin(3.14159265358979323846 * t) /
                                  (3.14159265358979323846 * t);
      table[i] = s * window;
    }
  }

  double operator()(double t) const {
    t = std::abs(t);
    if (t >= kHalfTaps) return 0.0;
    double u = t * kTableDensity;
    size_t i = static_cast<size_t>(u);
    double f = u - static_cast<double>(i);
    return table[i] + f * (table[i + 1] - table[i]);
  }
};

inline const SincKernel& sinc_kernel() {
  static const SincKernel k;
  return k;
}

}  // namespace detail

// Band-limited resampling of x from in_rate to out_rate using a 64-tap
// Kaiser-windowed sinc (beta 8.6). Samples outside [0, n) are treated as
// zero. When downsampling the kernel is dilated so the cutoff follows the
// output Nyquist.
inline std::vector<double> resample(const std::vector<double>& x, double in_rate,
                                    double out_rate) {
  if (in_rate <= 0 || out_rate <= 0) throw data_error("resample: rates must be positive");
  if (x.empty()) return {};
  if (in_rate == out_rate) return x;

  const auto& kernel = detail::sinc_kernel();
  const double ratio = out_rate / in_rate;
  const double scale = std::min(1.0, ratio);        // kernel dilation when decimating
  const double support = detail::SincKernel::kHalfTaps / scale;
  const int64_t n_in = static_cast<int64_t>(x.size());
  const int64_t n_out = static_cast<int64_t>(std::llround(n_in * ratio));

  std::vector<double> y(static_cast<size_t>(n_out), 0.0);
  for (int64_t n = 0; n < n_out; ++n) {
    double t = n / ratio;  // position in input samples
    int64_t k_lo = static_cast<int64_t>(std::ceil(t - support));
    int64_t k_hi = static_cast<int64_t>(std::floor(t + support));
    if (k_lo < 0) k_lo = 0;
    if (k_hi >= n_in) k_hi = n_in - 1;
    double acc = 0.0;
    for (int64_t k = k_lo; k <= k_hi; ++k) acc += x[static_cast<size_t>(k)] * kernel((t - k) * scale);
    y[static_cast<size_t>(n)] = acc * scale;
  }
  return y;
}

// Resamples x to exactly out_len samples (used by the pitch shifter).
inline std::vector<double> resample_to_length(const std::vector<double>& x, size_t out_len) {
  if (x.empty() || out_len == 0) return std::vector<double>(out_len, 0.0);
  if (x.size() == out_len) return x;
  auto y = resample(x, static_cast<double>(x.size()), static_cast<double>(out_len));
  y.resize(out_len, 0.0);  // llround may land one short/long; pad or trim the tail
  return y;
}

}  // namespace respira::audio
