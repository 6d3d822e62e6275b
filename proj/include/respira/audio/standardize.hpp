#pragma once
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

#include "respira/audio/resample.hpp"
#include "respira/audio/wav.hpp"
#include "respira/core/error.hpp"

namespace respira::audio {

constexpr int kClipRate = 16000;
constexpr int kClipSamples = 64000;  // 4 s at 16 kHz
constexpr double kClipSeconds = 4.0;

// Fixed-shape clip: 64,000 samples at 16 kHz. peak_normalized guarantees
// max |x| <= 1; zscored guarantees mean ~0 / var ~1 except for the all-zero
// clip, which stays all-zero through both stages.
struct StandardClip {
  enum class Stage { peak_normalized, zscored };

  std::vector<float> samples;  // always kClipSamples long
  Stage stage = Stage::zscored;

  static const char* stage_name(Stage s) {
    return s == Stage::peak_normalized ? "peak_normalized" : "zscored";
  }
};

namespace detail {

inline std::vector<double> mix_to_mono(const RawRecording& rec) {
  size_t n = rec.frames();
  std::vector<double> mono(n, 0.0);
  double inv = 1.0 / rec.channel_count();
  for (const auto& ch : rec.channels) {
    if (ch.size() != n) throw data_error("standardize: channels of unequal length");
    for (size_t i = 0; i < n; ++i) mono[i] += ch[i] * inv;
  }
  return mono;
}

// Trim takes the center 4 s; padding appends trailing zeros so the signal
// stays left-aligned and onsets survive.
inline std::vector<double> fit_length(std::vector<double> x, size_t target) {
  if (x.size() > target) {
    size_t start = (x.size() - target) / 2;
    return std::vector<double>(x.begin() + static_cast<int64_t>(start),
                               x.begin() + static_cast<int64_t>(start + target));
  }
  x.resize(target, 0.0);
  return x;
}

inline double peak_abs(const std::vector<double>& x) {
  double peak = 0.0;
  for (double v : x) peak = std::max(peak, std::abs(v));
  return peak;
}

}  // namespace detail

// Mono mix -> 16 kHz resample -> fit to 64,000 samples -> peak normalize.
inline StandardClip standardize_peak(const RawRecording& rec) {
  if (rec.channel_count() == 0 || rec.frames() == 0)
    throw data_error("standardize: zero-length recording");
  if (rec.sample_rate <= 0) throw data_error("standardize: non-positive sample rate");

  std::vector<double> x = detail::mix_to_mono(rec);
  if (rec.sample_rate != kClipRate)
    x = resample(x, static_cast<double>(rec.sample_rate), static_cast<double>(kClipRate));
  x = detail::fit_length(std::move(x), kClipSamples);

  double peak = detail::peak_abs(x);
  StandardClip clip;
  clip.stage = StandardClip::Stage::peak_normalized;
  clip.samples.resize(kClipSamples);
  double inv = peak > 0.0 ? 1.0 / peak : 0.0;  // all-zero clip passes through
  for (int i = 0; i < kClipSamples; ++i)
    clip.samples[static_cast<size_t>(i)] = static_cast<float>(x[static_cast<size_t>(i)] * inv);
  return clip;
}

// Z-scores samples in double precision; the all-zero clip is returned as-is.
inline StandardClip zscore(const StandardClip& in) {
  StandardClip out;
  out.stage = StandardClip::Stage::zscored;
  out.samples.resize(in.samples.size());

  double mean = 0.0;
  for (float v : in.samples) mean += v;
  mean /= static_cast<double>(in.samples.size());
  double var = 0.0;
  for (float v : in.samples) {
    double d = v - mean;
    var += d * d;
  }
  var /= static_cast<double>(in.samples.size());

  if (var <= 0.0) {
    std::fill(out.samples.begin(), out.samples.end(), 0.0f);
    return out;
  }
  double inv_sd = 1.0 / std::sqrt(var);
  for (size_t i = 0; i < in.samples.size(); ++i)
    out.samples[i] = static_cast<float>((in.samples[i] - mean) * inv_sd);
  return out;
}

// Re-normalizes an arbitrary 64,000-sample buffer back into a z-scored clip
// (used after augmentation ops that change scale).
inline StandardClip zscore_samples(std::vector<double> x) {
  if (x.size() != static_cast<size_t>(kClipSamples))
    throw data_error("zscore_samples: expected 64000 samples");
  StandardClip tmp;
  tmp.stage = StandardClip::Stage::peak_normalized;
  tmp.samples.resize(x.size());
  for (size_t i = 0; i < x.size(); ++i) tmp.samples[i] = static_cast<float>(x[i]);
  return zscore(tmp);
}

// Full standardization: mono, 16 kHz, 64,000 samples, peak-normalized, then
// z-scored.
inline StandardClip standardize(const RawRecording& rec) { return zscore(standardize_peak(rec)); }

}  // namespace respira::audio
