#pragma once
#include <cmath>
#include <complex>
#include <cstdint>
#include <vector>

#include "respira/core/error.hpp"

namespace respira::dsp {

// Iterative radix-2 FFT, in place. n must be a power of two.
inline void fft_inplace(std::vector<std::complex<double>>& a, bool inverse = false) {
  const size_t n = a.size();
  if (n == 0 || (n & (n - 1)) != 0) throw data_error("fft: size must be a power of two");

  for (size_t i = 1, j = 0; i < n; ++i) {
    size_t bit = n >> 1;
    for (; j & bit; bit >>= 1) j ^= bit;
    j ^= bit;
    if (i < j) std::swap(a[i], a[j]);
  }
  for (size_t len = 2; len <= n; len <<= 1) {
    double ang = 2.0 * 3.14159265358979323846 / static_cast<double>(len) * (inverse ? 1.0 : -1.0);
    std::complex<double> wl(std::cos(ang), std::sin(ang));
    for (size_t i = 0; i < n; i += len) {
      std::complex<double> w(1.0, 0.0);
      for (size_t k = 0; k < len / 2; ++k) {
        std::complex<double> u = a[i + k];
        std::complex<double> v = a[i + k + len / 2] * w;
        a[i + k] = u + v;
        a[i + k + len / 2] = u - v;
        w *= wl;
      }
    }
  }
  if (inverse) {
    double inv = 1.0 / static_cast<double>(n);
    for (auto& v : a) v *= inv;
  }
}

// One-sided spectrum of a real frame: bins 0..n/2.
inline std::vector<std::complex<double>> rfft(const std::vector<double>& x) {
  std::vector<std::complex<double>> a(x.size());
  for (size_t i = 0; i < x.size(); ++i) a[i] = {x[i], 0.0};
  fft_inplace(a);
  a.resize(x.size() / 2 + 1);
  return a;
}

inline std::vector<double> irfft(const std::vector<std::complex<double>>& half, size_t n) {
  if (half.size() != n / 2 + 1) throw data_error("irfft: bin count does not match frame length");
  std::vector<std::complex<double>> a(n);
  for (size_t k = 0; k <= n / 2; ++k) a[k] = half[k];
  for (size_t k = n / 2 + 1; k < n; ++k) a[k] = std::conj(half[n - k]);
  fft_inplace(a, true);
  std::vector<double> x(n);
  for (size_t i = 0; i < n; ++i) x[i] = a[i].real();
  return x;
}

inline std::vector<double> hamming_window(size_t n) {
  std::vector<double> w(n);
  for (size_t i = 0; i < n; ++i)
    w[i] = 0.54 - 0.46 * std::cos(2.0 * 3.14159265358979323846 * static_cast<double>(i) /
                                  static_cast<double>(n - 1));
  return w;
}

inline std::vector<double> hann_window(size_t n) {
  std::vector<double> w(n);
  for (size_t i = 0; i < n; ++i)
    w[i] = 0.5 - 0.5 * std::cos(2.0 * 3.14159265358979323846 * static_cast<double>(i) /
                                static_cast<double>(n - 1));
  return w;
}

}  // namespace respira::dsp
