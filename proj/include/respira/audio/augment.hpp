#pragma once
#include <cmath>
#include <cstdint>
#include <vector>

#include "respira/audio/resample.hpp"
#include "respira/audio/standardize.hpp"
#include "respira/audio/vocoder.hpp"
#include "respira/core/error.hpp"
#include "respira/core/rng.hpp"

namespace respira::audio {

// Training-time perturbation policy. Ranges default to the production
// configuration; per-op application probabilities default to 0.5 and the ops
// stack independently.
struct AugmentPolicy {
  double p_stretch = 0.5;
  double p_pitch = 0.5;
  double p_noise = 0.5;
  double stretch_lo = 0.9, stretch_hi = 1.1;
  double pitch_lo_semitones = -2.0, pitch_hi_semitones = 2.0;
  double snr_lo_db = 15.0, snr_hi_db = 30.0;

  void validate() const {
    auto prob = [](double p) { return p >= 0.0 && p <= 1.0; };
    if (!prob(p_stretch) || !prob(p_pitch) || !prob(p_noise))
      throw data_error("augment policy: probabilities must lie in [0, 1]");
    if (stretch_lo > stretch_hi || pitch_lo_semitones > pitch_hi_semitones ||
        snr_lo_db > snr_hi_db)
      throw data_error("augment policy: empty parameter range");
  }
};

// One sample's concrete augmentation decisions, drawn up-front so the
// decision stream can be tested without running any DSP.
struct AugmentPlan {
  bool do_stretch = false;
  double rate = 1.0;
  bool do_pitch = false;
  double semitones = 0.0;
  bool do_noise = false;
  double snr_db = 0.0;

  bool any() const { return do_stretch || do_pitch || do_noise; }
};

inline AugmentPlan draw_augment_plan(const AugmentPolicy& policy, Rng& rng) {
  policy.validate();
  AugmentPlan plan;
  plan.do_stretch = rng.uniform() < policy.p_stretch;
  plan.rate = rng.uniform(policy.stretch_lo, policy.stretch_hi);
  plan.do_pitch = rng.uniform() < policy.p_pitch;
  plan.semitones = rng.uniform(policy.pitch_lo_semitones, policy.pitch_hi_semitones);
  plan.do_noise = rng.uniform() < policy.p_noise;
  plan.snr_db = rng.uniform(policy.snr_lo_db, policy.snr_hi_db);
  return plan;
}

namespace detail {

inline std::vector<double> to_double(const StandardClip& clip) {
  return std::vector<double>(clip.samples.begin(), clip.samples.end());
}

}  // namespace detail

// Pitch-preserving tempo change; the result is re-fit to 64,000 samples with
// the standard trim/pad rule and re-z-scored.
inline StandardClip time_stretch(const StandardClip& clip, double rate) {
  auto stretched = phase_vocoder_stretch(detail::to_double(clip), rate);
  return zscore_samples(audio::detail::fit_length(std::move(stretched), kClipSamples));
}

// Shifts pitch by the given semitones at constant duration: stretch by
// 2^(-s/12), then resample back to 64,000 samples.
inline StandardClip pitch_shift(const StandardClip& clip, double semitones) {
  if (semitones < -2.0 || semitones > 2.0)
    throw data_error("pitch shift: semitones outside [-2, 2]");
  double factor = std::pow(2.0, -semitones / 12.0);
  auto stretched = phase_vocoder_stretch(detail::to_double(clip), factor);
  auto refit = resample_to_length(stretched, kClipSamples);
  return zscore_samples(std::move(refit));
}

// Adds Gaussian noise scaled so the sample power ratio hits snr_db exactly,
// then re-z-scores (the joint rescale preserves the ratio).
inline StandardClip add_noise(const StandardClip& clip, double snr_db, Rng& rng) {
  auto x = detail::to_double(clip);
  double signal_power = 0.0;
  for (double v : x) signal_power += v * v;
  signal_power /= static_cast<double>(x.size());
  if (signal_power <= 0.0) throw data_error("add noise: all-zero clip has undefined SNR");

  std::vector<double> noise(x.size());
  double noise_power = 0.0;
  for (auto& v : noise) {
    v = rng.gaussian();
    noise_power += v * v;
  }
  noise_power /= static_cast<double>(noise.size());
  double target_noise_power = signal_power / std::pow(10.0, snr_db / 10.0);
  double gain = std::sqrt(target_noise_power / noise_power);
  for (size_t i = 0; i < x.size(); ++i) x[i] += gain * noise[i];
  return zscore_samples(std::move(x));
}

// Applies the drawn perturbations in order stretch -> pitch -> noise. Output
// is always a valid z-scored StandardClip; identity when nothing fires.
inline StandardClip augment(const StandardClip& clip, const AugmentPolicy& policy, Rng& rng) {
  AugmentPlan plan = draw_augment_plan(policy, rng);
  if (!plan.any()) return clip;
  StandardClip out = clip;
  if (plan.do_stretch) out = time_stretch(out, plan.rate);
  if (plan.do_pitch) out = pitch_shift(out, plan.semitones);
  if (plan.do_noise) {
    Rng noise_rng = rng.derive("noise");
    out = add_noise(out, plan.snr_db, noise_rng);
  }
  return out;
}

}  // namespace respira::audio
