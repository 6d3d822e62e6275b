#include <doctest.h>

#include <cmath>
#include <vector>

#include "respira/dsp/handcrafted.hpp"
#include "support/signals.hpp"

using namespace respira;
using namespace respira::dsp;
using respira::audio::StandardClip;

namespace {

StandardClip peak_tone(double hz, double amp = 0.9) {
  return audio::standardize_peak(
      signals::mono_recording(signals::sine(hz, 16000.0, 64000, amp), 16000));
}

}  // namespace

TEST_CASE("handcrafted: golden layout - names, order, width") {
  const auto& names = handcrafted_feature_names();
  REQUIRE(names.size() == 70);
  CHECK(names[0] == "mfcc_mean_00");
  CHECK(names[19] == "mfcc_mean_19");
  CHECK(names[20] == "mfcc_std_00");
  CHECK(names[39] == "mfcc_std_19");
  CHECK(names[40] == "zcr_mean");
  CHECK(names[41] == "zcr_std");
  CHECK(names[42] == "centroid_mean");
  CHECK(names[43] == "centroid_std");
  CHECK(names[44] == "bandwidth_mean");
  CHECK(names[45] == "bandwidth_std");
  CHECK(names[46] == "chroma_mean_00");
  CHECK(names[57] == "chroma_mean_11");
  CHECK(names[58] == "chroma_std_00");
  CHECK(names[69] == "chroma_std_11");
}

TEST_CASE("handcrafted: all-zero clip degenerate conventions") {
  StandardClip zero;
  zero.stage = StandardClip::Stage::peak_normalized;
  zero.samples.assign(64000, 0.0f);
  HandcraftedVector v = handcrafted_vector(zero);
  CHECK(v.values[40] == 0.0f);  // zcr mean
  CHECK(v.values[41] == 0.0f);
  CHECK(v.values[42] == 0.0f);  // centroid mean (zero-energy convention)
  CHECK(v.values[44] == 0.0f);  // bandwidth mean
  for (int i = 0; i < 70; ++i) {
    INFO("index " << i);
    if (i >= 20 && i < 40) CHECK(v.values[static_cast<size_t>(i)] == 0.0f);  // mfcc stds
    if (i >= 46) CHECK(v.values[static_cast<size_t>(i)] == 0.0f);            // chroma
  }
}

TEST_CASE("handcrafted: sigma entries are non-negative and zcr mean in [0,1]") {
  HandcraftedVector v = handcrafted_vector(peak_tone(831.0));
  for (int k = 20; k < 40; ++k) CHECK(v.values[static_cast<size_t>(k)] >= 0.0f);
  CHECK(v.values[41] >= 0.0f);
  CHECK(v.values[43] >= 0.0f);
  CHECK(v.values[45] >= 0.0f);
  for (int k = 58; k < 70; ++k) CHECK(v.values[static_cast<size_t>(k)] >= 0.0f);
  CHECK(v.values[40] >= 0.0f);
  CHECK(v.values[40] <= 1.0f);
  CHECK(v.values[42] >= 0.0f);
  CHECK(v.values[42] <= 8000.0f);
  CHECK(v.values[44] >= 0.0f);
  CHECK(v.values[44] <= 8000.0f);
}

TEST_CASE("handcrafted: pure 1 kHz tone has centroid 1000 Hz and near-zero bandwidth") {
  HandcraftedVector v = handcrafted_vector(peak_tone(1000.0));
  CHECK(std::abs(v.values[42] - 1000.0f) < 20.0f);
  CHECK(v.values[44] < 60.0f);
}

TEST_CASE("handcrafted: 500 Hz square wave ZCR matches the crossing-count oracle") {
  std::vector<double> sq(64000);
  for (size_t i = 0; i < sq.size(); ++i)
    sq[i] = std::sin(2.0 * 3.14159265358979323846 * 500.0 * static_cast<double>(i) / 16000.0) >= 0.0
                ? 0.8
                : -0.8;
  StandardClip clip = audio::standardize_peak(signals::mono_recording(sq, 16000));
  HandcraftedVector v = handcrafted_vector(clip);
  double expected = 2.0 * 500.0 / 16000.0;  // 0.0625
  CHECK(std::abs(v.values[40] - expected) / expected < 0.05);
}

TEST_CASE("handcrafted: chroma of a pure tone concentrates in its pitch class") {
  // 440 Hz = pitch class 0 (A); neighbours are 11 and 1.
  HandcraftedVector v = handcrafted_vector(peak_tone(440.0));
  double total = 0.0;
  for (int c = 0; c < 12; ++c) total += v.values[static_cast<size_t>(46 + c)];
  double focus = v.values[46 + 0] + v.values[46 + 1] + v.values[46 + 11];
  REQUIRE(total > 0.0);
  CHECK(focus / total >= 0.6);
}

TEST_CASE("handcrafted: white noise MFCC is dominated by coefficient zero") {
  StandardClip clip = audio::standardize_peak(
      signals::mono_recording(signals::gaussian_noise(64000, 0.4, 17), 16000));
  HandcraftedVector v = handcrafted_vector(clip);
  double c0 = std::abs(v.values[0]);
  for (int k = 1; k < 20; ++k) {
    INFO("coefficient " << k);
    CHECK(c0 > std::abs(v.values[static_cast<size_t>(k)]));
  }
}
