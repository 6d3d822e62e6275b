#pragma once
#include <cmath>
#include <complex>
#include <cstdint>
#include <vector>

#include "respira/audio/standardize.hpp"
#include "respira/core/error.hpp"
#include "respira/dsp/fft.hpp"

namespace respira::dsp {

constexpr int kStftWindow = 1024;
constexpr int kStftHop = 256;
constexpr int kStftBins = kStftWindow / 2 + 1;  // 513
// Frames start at 0, 256, ... with no center padding.
constexpr int kStftFrames = (respira::audio::kClipSamples - kStftWindow) / kStftHop + 1;  // 247

// Magnitude spectrogram, bins x frames, plus the axis annotations.
struct Spectrogram {
  int bins = 0;
  int frames = 0;
  std::vector<double> magnitudes;   // row-major [bin][frame]
  std::vector<double> bin_hz;       // per-bin center frequency
  std::vector<double> frame_times;  // per-frame start time, seconds

  double& at(int bin, int frame) { return magnitudes[static_cast<size_t>(bin) * frames + frame]; }
  double at(int bin, int frame) const {
    return magnitudes[static_cast<size_t>(bin) * frames + frame];
  }
};

// Hamming-windowed magnitude STFT of a standard clip (1024/256, no padding).
inline Spectrogram stft(const audio::StandardClip& clip) {
  if (clip.samples.size() != static_cast<size_t>(audio::kClipSamples))
    throw data_error("stft: clip must hold 64000 samples");

  static const std::vector<double> window = hamming_window(kStftWindow);

  Spectrogram spec;
  spec.bins = kStftBins;
  spec.frames = kStftFrames;
  spec.magnitudes.assign(static_cast<size_t>(kStftBins) * kStftFrames, 0.0);
  spec.bin_hz.resize(kStftBins);
  for (int k = 0; k < kStftBins; ++k)
    spec.bin_hz[static_cast<size_t>(k)] =
        static_cast<double>(k) * audio::kClipRate / static_cast<double>(kStftWindow);
  spec.frame_times.resize(kStftFrames);

  std::vector<double> frame(kStftWindow);
  for (int t = 0; t < kStftFrames; ++t) {
    size_t start = static_cast<size_t>(t) * kStftHop;
    spec.frame_times[static_cast<size_t>(t)] =
        static_cast<double>(start) / audio::kClipRate;
    for (int i = 0; i < kStftWindow; ++i)
      frame[static_cast<size_t>(i)] =
          window[static_cast<size_t>(i)] * clip.samples[start + static_cast<size_t>(i)];
    auto half = rfft(frame);
    for (int k = 0; k < kStftBins; ++k) spec.at(k, t) = std::abs(half[static_cast<size_t>(k)]);
  }
  return spec;
}

}  // namespace respira::dsp
