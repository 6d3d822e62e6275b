#pragma once
#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "respira/audio/standardize.hpp"
#include "respira/dsp/fft.hpp"

namespace respira::audio {

struct QcConfig {
  double threshold_clip = 0.05;   // max tolerated fraction of rail samples
  double threshold_snr_db = 5.0;  // min tolerated SNR estimate
};

struct QcReport {
  double clipping_fraction = 0.0;
  double snr_estimate_db = 0.0;
  bool accept = true;
  std::string reason;  // non-empty whenever accept is false
};

namespace detail {

// SNR from the averaged periodogram: the median spectral bin tracks the
// broadband noise floor (structured energy occupies few bins), total power
// comes from the time domain, and signal = total - noise. Capped at +/-200 dB
// so silence and pure tones stay finite.
inline double estimate_snr_db(const std::vector<float>& x) {
  constexpr int kFrame = 512;
  constexpr int kHop = 256;
  constexpr double kCap = 200.0;

  static const std::vector<double> window = dsp::hann_window(kFrame);
  static const double win_energy = [] {
    double s = 0.0;
    for (double w : dsp::hann_window(kFrame)) s += w * w;
    return s;
  }();

  double total_power = 0.0;
  for (float v : x) total_power += static_cast<double>(v) * v;
  total_power /= static_cast<double>(x.size());
  if (total_power <= 0.0) return -kCap;

  const int frames = static_cast<int>((x.size() - kFrame) / kHop) + 1;
  std::vector<double> avg_bin(kFrame / 2 + 1, 0.0);
  std::vector<double> frame(kFrame);
  for (int t = 0; t < frames; ++t) {
    size_t start = static_cast<size_t>(t) * kHop;
    for (int i = 0; i < kFrame; ++i)
      frame[static_cast<size_t>(i)] = window[static_cast<size_t>(i)] * x[start + static_cast<size_t>(i)];
    auto half = dsp::rfft(frame);
    for (size_t k = 0; k < avg_bin.size(); ++k) avg_bin[k] += std::norm(half[k]);
  }
  for (double& v : avg_bin) v /= frames;

  // Interior bins only; DC/Nyquist have half the noise bandwidth.
  std::vector<double> interior(avg_bin.begin() + 1, avg_bin.end() - 1);
  std::nth_element(interior.begin(), interior.begin() + static_cast<int64_t>(interior.size() / 2),
                   interior.end());
  double median_bin = interior[interior.size() / 2];

  // For white noise of variance s2, E|DFT_k|^2 = s2 * sum(w^2); with ~250
  // averaged frames the median of the bin estimate sits within 1% of its
  // mean, so no exponential-median correction is applied.
  double noise_power = median_bin / win_energy;
  double signal_power = total_power - noise_power;

  if (noise_power <= total_power * 1e-20) return kCap;
  if (signal_power <= noise_power * 1e-20) return -kCap;
  return std::clamp(10.0 * std::log10(signal_power / noise_power), -kCap, kCap);
}

}  // namespace detail

// Clipping fraction is defined on the peak-normalized stage; a z-scored clip
// is rescaled to unit peak before counting rail samples.
inline QcReport quality_check(const StandardClip& clip, const QcConfig& cfg = {}) {
  QcReport report;

  double peak = 0.0;
  for (float v : clip.samples) peak = std::max(peak, std::abs(static_cast<double>(v)));
  if (peak > 0.0) {
    double rail = 0.999 * peak;
    size_t clipped = 0;
    for (float v : clip.samples)
      if (std::abs(static_cast<double>(v)) >= rail) ++clipped;
    report.clipping_fraction = static_cast<double>(clipped) / static_cast<double>(clip.samples.size());
  }

  report.snr_estimate_db = detail::estimate_snr_db(clip.samples);

  if (report.clipping_fraction > cfg.threshold_clip) {
    report.accept = false;
    report.reason = "clipping fraction " + std::to_string(report.clipping_fraction) +
                    " exceeds threshold " + std::to_string(cfg.threshold_clip);
  } else if (report.snr_estimate_db < cfg.threshold_snr_db) {
    report.accept = false;
    report.reason = "snr estimate " + std::to_string(report.snr_estimate_db) +
                    " dB below threshold " + std::to_string(cfg.threshold_snr_db) + " dB";
  }
  return report;
}

}  // namespace respira::audio
