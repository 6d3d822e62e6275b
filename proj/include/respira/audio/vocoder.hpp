#pragma once
#include <cmath>
#include <complex>
#include <cstdint>
#include <vector>

#include "respira/core/error.hpp"
#include "respira/dsp/fft.hpp"

namespace respira::audio {

namespace detail {

inline double princarg(double phase) {
  constexpr double two_pi = 6.283185307179586476925286766559;
  return phase - two_pi * std::round(phase / two_pi);
}

}  // namespace detail

// Phase-vocoder time stretch (1024/256 Hamming). rate > 1 shortens the
// signal (duration / rate), rate < 1 lengthens it; pitch is preserved via
// per-bin instantaneous-frequency propagation. Output length is
// round(n / rate).
inline std::vector<double> phase_vocoder_stretch(const std::vector<double>& x, double rate) {
  if (rate < 0.5 || rate > 2.0) throw data_error("time stretch: rate outside [0.5, 2.0]");

  constexpr int kWin = 1024;
  constexpr int kHop = 256;  // synthesis hop
  constexpr int kBins = kWin / 2 + 1;
  constexpr double two_pi = 6.283185307179586476925286766559;

  const int64_t n_in = static_cast<int64_t>(x.size());
  const int64_t n_out = std::llround(static_cast<double>(n_in) / rate);
  if (n_in < kWin) throw data_error("time stretch: input shorter than one analysis window");

  static const std::vector<double> window = dsp::hamming_window(kWin);

  const int64_t out_frames = (n_out - kWin) / kHop + 1;
  if (out_frames < 2) throw data_error("time stretch: output too short for overlap-add");

  std::vector<double> y(static_cast<size_t>(n_out), 0.0);
  std::vector<double> norm(static_cast<size_t>(n_out), 0.0);

  std::vector<double> prev_phase(kBins, 0.0);
  std::vector<double> synth_phase(kBins, 0.0);
  std::vector<double> frame(kWin);
  int64_t prev_pos = 0;

  for (int64_t m = 0; m < out_frames; ++m) {
    int64_t pos = std::llround(static_cast<double>(m) * kHop * rate);
    if (pos > n_in - kWin) pos = n_in - kWin;

    for (int i = 0; i < kWin; ++i)
      frame[static_cast<size_t>(i)] =
          window[static_cast<size_t>(i)] * x[static_cast<size_t>(pos + i)];
    auto spec = dsp::rfft(frame);

    std::vector<std::complex<double>> out_spec(kBins);
    if (m == 0) {
      for (int k = 0; k < kBins; ++k) {
        prev_phase[static_cast<size_t>(k)] = std::arg(spec[static_cast<size_t>(k)]);
        synth_phase[static_cast<size_t>(k)] = prev_phase[static_cast<size_t>(k)];
        out_spec[static_cast<size_t>(k)] = spec[static_cast<size_t>(k)];
      }
    } else {
      const double dt = static_cast<double>(pos - prev_pos);
      for (int k = 0; k < kBins; ++k) {
        double mag = std::abs(spec[static_cast<size_t>(k)]);
        double phase = std::arg(spec[static_cast<size_t>(k)]);
        double omega = two_pi * k / kWin;  // bin center frequency, rad/sample
        double expected = prev_phase[static_cast<size_t>(k)] + omega * dt;
        double inst_freq = dt > 0.0 ? omega + detail::princarg(phase - expected) / dt : omega;
        synth_phase[static_cast<size_t>(k)] =
            detail::princarg(synth_phase[static_cast<size_t>(k)] + inst_freq * kHop);
        prev_phase[static_cast<size_t>(k)] = phase;
        out_spec[static_cast<size_t>(k)] = std::polar(mag, synth_phase[static_cast<size_t>(k)]);
      }
    }
    prev_pos = pos;

    auto seg = dsp::irfft(out_spec, kWin);
    int64_t out_pos = m * kHop;
    for (int i = 0; i < kWin; ++i) {
      double w = window[static_cast<size_t>(i)];
      y[static_cast<size_t>(out_pos + i)] += w * seg[static_cast<size_t>(i)];
      norm[static_cast<size_t>(out_pos + i)] += w * w;
    }
  }

  for (size_t i = 0; i < y.size(); ++i)
    if (norm[i] > 1e-9) y[i] /= norm[i];
  return y;
}

}  // namespace respira::audio
