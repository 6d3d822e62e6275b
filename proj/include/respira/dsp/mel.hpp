#pragma once
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

#include "respira/dsp/stft.hpp"

namespace respira::dsp {

constexpr int kMelBands = 128;
constexpr double kMelFmin = 20.0;
constexpr double kMelFmax = 8000.0;
constexpr double kPowerFloor = 1e-10;

inline double hz_to_mel(double f) { return 2595.0 * std::log10(1.0 + f / 700.0); }
inline double mel_to_hz(double m) { return 700.0 * (std::pow(10.0, m / 2595.0) - 1.0); }

// Triangular filterbank on the HTK mel scale, 20 Hz - 8 kHz, unit peak per
// band. Rows are non-negative, sum to a positive value and overlap their
// neighbours.
struct MelFilterbank {
  std::vector<double> weights;    // [band][bin], kMelBands x kStftBins
  std::vector<double> center_hz;  // per band

  MelFilterbank() {
    weights.assign(static_cast<size_t>(kMelBands) * kStftBins, 0.0);
    center_hz.resize(kMelBands);

    const double mel_lo = hz_to_mel(kMelFmin);
    const double mel_hi = hz_to_mel(kMelFmax);
    std::vector<double> edges(kMelBands + 2);
    for (int i = 0; i < kMelBands + 2; ++i)
      edges[static_cast<size_t>(i)] =
          mel_to_hz(mel_lo + (mel_hi - mel_lo) * i / (kMelBands + 1));

    for (int b = 0; b < kMelBands; ++b) {
      double f_lo = edges[static_cast<size_t>(b)];
      double f_c = edges[static_cast<size_t>(b) + 1];
      double f_hi = edges[static_cast<size_t>(b) + 2];
      center_hz[static_cast<size_t>(b)] = f_c;
      for (int k = 0; k < kStftBins; ++k) {
        double f = static_cast<double>(k) * audio::kClipRate / kStftWindow;
        double w = 0.0;
        if (f > f_lo && f < f_hi)
          w = f <= f_c ? (f - f_lo) / (f_c - f_lo) : (f_hi - f) / (f_hi - f_c);
        weights[static_cast<size_t>(b) * kStftBins + static_cast<size_t>(k)] = w;
      }
    }
  }

  double at(int band, int bin) const {
    return weights[static_cast<size_t>(band) * kStftBins + static_cast<size_t>(bin)];
  }
};

inline const MelFilterbank& mel_filterbank() {
  static const MelFilterbank fb;
  return fb;
}

// 128 x T z-scored log-mel matrix; the deep-branch input.
struct MelSpectrogram {
  int bands = kMelBands;
  int frames = 0;
  std::vector<float> values;  // row-major [band][frame]
  std::vector<double> mel_centers_hz;

  float at(int band, int frame) const {
    return values[static_cast<size_t>(band) * frames + static_cast<size_t>(frame)];
  }
};

// Projects the power spectrogram onto the filterbank band b for frame t.
inline double mel_band_power(const Spectrogram& spec, const MelFilterbank& fb, int band, int t) {
  double acc = 0.0;
  for (int k = 0; k < kStftBins; ++k) {
    double w = fb.at(band, k);
    if (w != 0.0) {
      double m = spec.at(k, t);
      acc += w * m * m;
    }
  }
  return acc;
}

// Log-mel energies (10*log10 with a 1e-10 floor), no normalization. Shared by
// the mel-spectrogram and the MFCC path.
inline std::vector<double> log_mel_frames(const Spectrogram& spec) {
  const auto& fb = mel_filterbank();
  std::vector<double> lm(static_cast<size_t>(kMelBands) * spec.frames);
  for (int b = 0; b < kMelBands; ++b)
    for (int t = 0; t < spec.frames; ++t)
      lm[static_cast<size_t>(b) * spec.frames + static_cast<size_t>(t)] =
          10.0 * std::log10(std::max(mel_band_power(spec, fb, b, t), kPowerFloor));
  return lm;
}

// Full deep-branch feature: STFT -> mel projection -> dB -> per-spectrogram
// z-score. A zero-variance (silent) spectrogram z-scores to all-zero.
inline MelSpectrogram mel_spectrogram(const audio::StandardClip& clip) {
  Spectrogram spec = stft(clip);
  std::vector<double> lm = log_mel_frames(spec);

  double mean = 0.0;
  for (double v : lm) mean += v;
  mean /= static_cast<double>(lm.size());
  double var = 0.0;
  for (double v : lm) var += (v - mean) * (v - mean);
  var /= static_cast<double>(lm.size());

  MelSpectrogram out;
  out.frames = spec.frames;
  out.mel_centers_hz = mel_filterbank().center_hz;
  out.values.resize(lm.size());
  if (var <= 1e-24) {
    std::fill(out.values.begin(), out.values.end(), 0.0f);
    return out;
  }
  double inv_sd = 1.0 / std::sqrt(var);
  for (size_t i = 0; i < lm.size(); ++i)
    out.values[i] = static_cast<float>((lm[i] - mean) * inv_sd);
  return out;
}

}  // namespace respira::dsp
