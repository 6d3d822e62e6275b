#pragma once
#include <array>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "respira/dsp/mel.hpp"
#include "respira/dsp/stft.hpp"

namespace respira::dsp {

constexpr int kMfccCount = 20;
constexpr int kChromaBins = 12;
constexpr int kHandDim = 70;  // 2*(20 MFCC + ZCR + centroid + bandwidth + 12 chroma)

// Fixed 70-value layout:
//   [0..19]  MFCC means        [20..39] MFCC stds
//   [40]     ZCR mean          [41]     ZCR std
//   [42]     centroid mean     [43]     centroid std
//   [44]     bandwidth mean    [45]     bandwidth std
//   [46..57] chroma means      [58..69] chroma stds
struct HandcraftedVector {
  std::array<float, kHandDim> values{};
};

inline const std::vector<std::string>& handcrafted_feature_names() {
  static const std::vector<std::string> names = [] {
    std::vector<std::string> n;
    auto two = [](int i) {
      std::string s = std::to_string(i);
      return s.size() < 2 ? "0" + s : s;
    };
    for (int i = 0; i < kMfccCount; ++i) n.push_back("mfcc_mean_" + two(i));
    for (int i = 0; i < kMfccCount; ++i) n.push_back("mfcc_std_" + two(i));
    n.push_back("zcr_mean");
    n.push_back("zcr_std");
    n.push_back("centroid_mean");
    n.push_back("centroid_std");
    n.push_back("bandwidth_mean");
    n.push_back("bandwidth_std");
    for (int i = 0; i < kChromaBins; ++i) n.push_back("chroma_mean_" + two(i));
    for (int i = 0; i < kChromaBins; ++i) n.push_back("chroma_std_" + two(i));
    return n;
  }();
  return names;
}

namespace detail {

// Orthonormal DCT-II basis, kMfccCount x kMelBands.
inline const std::vector<double>& dct_basis() {
  static const std::vector<double> basis = [] {
    std::vector<double> b(static_cast<size_t>(kMfccCount) * kMelBands);
    const double pi = 3.14159265358979323846;
    for (int k = 0; k < kMfccCount; ++k) {
      double scale = std::sqrt((k == 0 ? 1.0 : 2.0) / kMelBands);
      for (int n = 0; n < kMelBands; ++n)
        b[static_cast<size_t>(k) * kMelBands + static_cast<size_t>(n)] =
            scale * std::cos(pi * k * (2.0 * n + 1.0) / (2.0 * kMelBands));
    }
    return b;
  }();
  return basis;
}

struct MeanStd {
  double mean = 0.0;
  double sd = 0.0;
};

inline MeanStd mean_std(const std::vector<double>& v) {
  MeanStd r;
  if (v.empty()) return r;
  bool all_equal = true;
  for (double x : v)
    if (x != v[0]) {
      all_equal = false;
      break;
    }
  if (all_equal) {  // constant sequence: exact zero spread, no rounding noise
    r.mean = v[0];
    return r;
  }
  for (double x : v) r.mean += x;
  r.mean /= static_cast<double>(v.size());
  double var = 0.0;
  for (double x : v) var += (x - r.mean) * (x - r.mean);
  r.sd = std::sqrt(var / static_cast<double>(v.size()));
  return r;
}

// Pitch class of a frequency, A440-referenced: round(12*log2(f/440)) mod 12.
inline int pitch_class(double hz) {
  int pc = static_cast<int>(std::lround(12.0 * std::log2(hz / 440.0))) % kChromaBins;
  return pc < 0 ? pc + kChromaBins : pc;
}

}  // namespace detail

// Computes the 70-dim statistical embedding from a clip. Expected input is
// the peak-normalized stage so centroid and bandwidth keep physical units;
// the descriptors themselves are scale-invariant except for MFCC c0.
inline HandcraftedVector handcrafted_vector(const audio::StandardClip& clip) {
  Spectrogram spec = stft(clip);
  const int T = spec.frames;

  // MFCCs per frame: DCT-II of the log-mel energies.
  std::vector<double> log_mel = log_mel_frames(spec);  // [band][frame]
  const auto& dct = detail::dct_basis();
  std::vector<std::vector<double>> mfcc(kMfccCount, std::vector<double>(T, 0.0));
  for (int k = 0; k < kMfccCount; ++k)
    for (int t = 0; t < T; ++t) {
      double acc = 0.0;
      for (int b = 0; b < kMelBands; ++b)
        acc += dct[static_cast<size_t>(k) * kMelBands + static_cast<size_t>(b)] *
               log_mel[static_cast<size_t>(b) * T + static_cast<size_t>(t)];
      mfcc[static_cast<size_t>(k)][static_cast<size_t>(t)] = acc;
    }

  // Frame-wise ZCR over the same 1024/256 frame grid as the STFT.
  std::vector<double> zcr(T, 0.0);
  for (int t = 0; t < T; ++t) {
    size_t start = static_cast<size_t>(t) * kStftHop;
    int crossings = 0;
    for (int i = 0; i + 1 < kStftWindow; ++i) {
      double a = clip.samples[start + static_cast<size_t>(i)];
      double b = clip.samples[start + static_cast<size_t>(i) + 1];
      if (a * b < 0.0) ++crossings;
    }
    zcr[static_cast<size_t>(t)] = static_cast<double>(crossings) / (kStftWindow - 1);
  }

  // Magnitude-weighted spectral moments; zero-energy frames contribute 0.
  std::vector<double> centroid(T, 0.0), bandwidth(T, 0.0);
  for (int t = 0; t < T; ++t) {
    double wsum = 0.0, fsum = 0.0;
    for (int k = 0; k < kStftBins; ++k) {
      double m = spec.at(k, t);
      wsum += m;
      fsum += m * spec.bin_hz[static_cast<size_t>(k)];
    }
    if (wsum <= 0.0) continue;
    double c = fsum / wsum;
    double spread = 0.0;
    for (int k = 0; k < kStftBins; ++k) {
      double d = spec.bin_hz[static_cast<size_t>(k)] - c;
      spread += spec.at(k, t) * d * d;
    }
    centroid[static_cast<size_t>(t)] = c;
    bandwidth[static_cast<size_t>(t)] = std::sqrt(spread / wsum);
  }

  // Chroma: bin energy folded onto pitch classes, L2-normalized per frame.
  std::vector<std::vector<double>> chroma(kChromaBins, std::vector<double>(T, 0.0));
  for (int t = 0; t < T; ++t) {
    std::array<double, kChromaBins> acc{};
    for (int k = 0; k < kStftBins; ++k) {
      double f = spec.bin_hz[static_cast<size_t>(k)];
      if (f < 32.0) continue;
      double m = spec.at(k, t);
      acc[static_cast<size_t>(detail::pitch_class(f))] += m * m;
    }
    double norm = 0.0;
    for (double v : acc) norm += v * v;
    norm = std::sqrt(norm);
    if (norm <= 0.0) continue;
    for (int c = 0; c < kChromaBins; ++c)
      chroma[static_cast<size_t>(c)][static_cast<size_t>(t)] = acc[static_cast<size_t>(c)] / norm;
  }

  HandcraftedVector out;
  int idx = 0;
  std::array<detail::MeanStd, kMfccCount> mfcc_stats;
  for (int k = 0; k < kMfccCount; ++k) mfcc_stats[static_cast<size_t>(k)] = detail::mean_std(mfcc[static_cast<size_t>(k)]);
  for (int k = 0; k < kMfccCount; ++k) out.values[static_cast<size_t>(idx++)] = static_cast<float>(mfcc_stats[static_cast<size_t>(k)].mean);
  for (int k = 0; k < kMfccCount; ++k) out.values[static_cast<size_t>(idx++)] = static_cast<float>(mfcc_stats[static_cast<size_t>(k)].sd);
  auto z = detail::mean_std(zcr);
  out.values[static_cast<size_t>(idx++)] = static_cast<float>(z.mean);
  out.values[static_cast<size_t>(idx++)] = static_cast<float>(z.sd);
  auto c = detail::mean_std(centroid);
  out.values[static_cast<size_t>(idx++)] = static_cast<float>(c.mean);
  out.values[static_cast<size_t>(idx++)] = static_cast<float>(c.sd);
  auto b = detail::mean_std(bandwidth);
  out.values[static_cast<size_t>(idx++)] = static_cast<float>(b.mean);
  out.values[static_cast<size_t>(idx++)] = static_cast<float>(b.sd);
  std::array<detail::MeanStd, kChromaBins> ch_stats;
  for (int i = 0; i < kChromaBins; ++i) ch_stats[static_cast<size_t>(i)] = detail::mean_std(chroma[static_cast<size_t>(i)]);
  for (int i = 0; i < kChromaBins; ++i) out.values[static_cast<size_t>(idx++)] = static_cast<float>(ch_stats[static_cast<size_t>(i)].mean);
  for (int i = 0; i < kChromaBins; ++i) out.values[static_cast<size_t>(idx++)] = static_cast<float>(ch_stats[static_cast<size_t>(i)].sd);
  return out;
}

}  // namespace respira::dsp
