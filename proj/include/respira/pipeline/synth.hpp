#pragma once
#include <cmath>
#include <filesystem>
#include <string>
#include <vector>

#include "respira/audio/standardize.hpp"
#include "respira/audio/wav.hpp"
#include "respira/core/binio.hpp"
#include "respira/core/rng.hpp"
#include "respira/train/manifest.hpp"

namespace respira::pipeline {

// Synthetic five-class tone corpus: class k carries a pure tone at
// 300 * 2^k Hz (300/600/1200/2400/4800) with randomized amplitude and phase
// plus a faint noise floor. Spectrally separable by construction; used by the
// demo workflow and the verification suites.
inline std::filesystem::path write_tone_dataset(const std::filesystem::path& dir,
                                                int clips_per_class, uint64_t seed) {
  std::filesystem::create_directories(dir / "wav");
  Rng root(seed);
  std::string csv = "clip_id,path,label\n";

  for (int c = 0; c < train::kNumClasses; ++c) {
    const double freq = 300.0 * std::pow(2.0, c);
    for (int i = 0; i < clips_per_class; ++i) {
      Rng rng = root.derive("clip", static_cast<uint64_t>(c), static_cast<uint64_t>(i));
      const double amp = rng.uniform(0.3, 0.9);
      const double phase = rng.uniform(0.0, 6.283185307179586);
      const double snr_db = rng.uniform(30.0, 40.0);
      const double noise_sd = amp * 0.70710678 / std::pow(10.0, snr_db / 20.0);

      std::vector<float> samples(static_cast<size_t>(audio::kClipSamples));
      const double w = 2.0 * 3.14159265358979323846 * freq / audio::kClipRate;
      for (size_t n = 0; n < samples.size(); ++n)
        samples[n] = static_cast<float>(amp * std::sin(w * static_cast<double>(n) + phase) +
                                        noise_sd * rng.gaussian());

      std::string clip_id =
          train::class_names()[static_cast<size_t>(c)] + "_" + std::to_string(i);
      std::string rel = "wav/" + clip_id + ".wav";
      write_file_bytes(dir / rel, audio::encode_wav_float32_mono(samples, audio::kClipRate));
      csv += clip_id + "," + rel + "," + train::class_names()[static_cast<size_t>(c)] + "\n";
    }
  }
  auto manifest_path = dir / "manifest.csv";
  write_file_text(manifest_path, csv);
  return manifest_path;
}

}  // namespace respira::pipeline
