#include <doctest.h>

#include <cmath>
#include <cstring>
#include <vector>

#include "respira/core/rng.hpp"
#include "respira/xai/gradcam.hpp"
#include "respira/xai/integrated_gradients.hpp"

using namespace respira;
using namespace respira::nn;
using namespace respira::xai;

namespace {

ModelConfig small_config(Variant v = Variant::FullHybrid) {
  ModelConfig cfg;
  cfg.conv_blocks = {{4, 3, 2}, {6, 3, 2}};
  cfg.conv_dropout = 0.0;
  cfg.lstm_units = 6;
  cfg.attention_dim = 5;
  cfg.hand_hidden = {6, 6};
  cfg.hand_dropout = 0.0;
  cfg.fusion_hidden = 10;
  cfg.fusion_dropout = 0.0;
  cfg.variant = v;
  cfg.mel_bins = 16;
  cfg.mel_frames = 24;
  cfg.hand_dim = 8;
  return cfg;
}

Tensor<float> random_tensor(std::vector<int> shape, uint64_t seed, double scale = 1.0) {
  Rng rng(seed);
  Tensor<float> t(std::move(shape));
  for (auto& v : t.v) v = static_cast<float>(scale * rng.gaussian());
  return t;
}

std::vector<uint8_t> serialize_params(const Model<float>& m) {
  std::vector<uint8_t> bytes;
  for (const auto& e : m.params().entries) {
    size_t off = bytes.size();
    bytes.resize(off + e.value.v.size() * 4);
    std::memcpy(bytes.data() + off, e.value.v.data(), e.value.v.size() * 4);
  }
  return bytes;
}

}  // namespace

TEST_CASE("ig: attributions vanish when x equals the baseline") {
  ModelConfig cfg = small_config();
  Model<float> model(cfg);
  model.init_params(Rng(1));
  Tensor<float> mel = random_tensor({1, cfg.mel_bins, cfg.mel_frames}, 2);
  Tensor<float> hand = random_tensor({1, cfg.hand_dim}, 3);
  AttributionMap a = integrated_gradients(model, mel, hand, mel, 0, 16);
  for (float v : a.values) CHECK(v == 0.0f);
  CHECK(a.diagnostics["completeness_gap"] < 1e-6);
}

TEST_CASE("ig: exact for a linear field at any step count") {
  // F(x) = <w, x>; IG_i = w_i (x_i - x'_i) for any m, here with x' = 0.
  const int n = 40;
  Rng rng(7);
  std::vector<double> w(n);
  for (auto& v : w) v = rng.gaussian();
  ScalarField<double> f;
  f.eval = [&w](const std::vector<double>& x, std::vector<double>* grad) {
    double acc = 0.0;
    for (size_t i = 0; i < x.size(); ++i) acc += w[i] * x[i];
    if (grad) *grad = w;
    return acc;
  };
  std::vector<double> x(n), baseline(n, 0.0);
  for (auto& v : x) v = rng.gaussian();
  for (int steps : {8, 16, 64}) {
    auto r = integrated_gradients_core(f, x, baseline, steps);
    for (int i = 0; i < n; ++i)
      CHECK(r.attributions[static_cast<size_t>(i)] ==
            doctest::Approx(w[static_cast<size_t>(i)] * x[static_cast<size_t>(i)]).epsilon(1e-12));
    CHECK(r.completeness_gap < 1e-12);
  }
}

TEST_CASE("ig: completeness gap shrinks as steps double on the real model") {
  ModelConfig cfg = small_config();
  Model<double> model(cfg);
  model.init_params(Rng(21));
  Tensor<double> hand = random_tensor({1, cfg.hand_dim}, 23).cast<double>();
  Tensor<double> baseline({1, cfg.mel_bins, cfg.mel_frames});  // zero baseline

  int improved = 0, trials = 6;
  for (int t = 0; t < trials; ++t) {
    Tensor<double> mel =
        random_tensor({1, cfg.mel_bins, cfg.mel_frames}, 100 + static_cast<uint64_t>(t))
            .cast<double>();
    ScalarField<double> f = mel_logit_field(model, hand, 1);
    auto g16 = integrated_gradients_core(f, mel.v, baseline.v, 16);
    auto g32 = integrated_gradients_core(f, mel.v, baseline.v, 32);
    if (g32.completeness_gap < g16.completeness_gap) ++improved;
  }
  CHECK(improved >= 4);  // monotone convergence up to kink noise
}

TEST_CASE("ig: step floor enforced") {
  ModelConfig cfg = small_config();
  Model<float> model(cfg);
  model.init_params(Rng(31));
  Tensor<float> mel = random_tensor({1, cfg.mel_bins, cfg.mel_frames}, 32);
  Tensor<float> hand = random_tensor({1, cfg.hand_dim}, 33);
  Tensor<float> baseline({1, cfg.mel_bins, cfg.mel_frames});
  CHECK_THROWS_AS(integrated_gradients(model, mel, hand, baseline, 0, 4), respira::Error);
}

TEST_CASE("gradcam: maps are non-negative and min-max normalized") {
  ModelConfig cfg = small_config();
  Model<float> model(cfg);
  model.init_params(Rng(41));
  Tensor<float> mel = random_tensor({1, cfg.mel_bins, cfg.mel_frames}, 42);
  Tensor<float> hand = random_tensor({1, cfg.hand_dim}, 43);
  AttributionMap a = grad_cam(model, mel, hand, 2);
  REQUIRE(a.shape == std::vector<int>{cfg.mel_bins, cfg.mel_frames});
  float lo = 1.0f, hi = 0.0f;
  for (float v : a.values) {
    CHECK(v >= 0.0f);
    CHECK(v <= 1.0f);
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  CHECK(hi == doctest::Approx(1.0f));
  CHECK(lo == doctest::Approx(0.0f));
}

TEST_CASE("gradcam: single-channel network reduces to ReLU of the channel") {
  // One conv block with one filter, CnnOnly head wired so the logit is the
  // spatial mean of the single channel: dlogit/dA is constant, so the map is
  // proportional to ReLU(A) and equals its min-max normalization.
  ModelConfig cfg;
  cfg.conv_blocks = {{1, 3, 2}};
  cfg.conv_dropout = 0.0;
  cfg.lstm_units = 1;
  cfg.attention_dim = 1;
  cfg.hand_hidden = {2, 2};
  cfg.hand_dropout = 0.0;
  cfg.fusion_hidden = 3;
  cfg.fusion_dropout = 0.0;
  cfg.variant = Variant::CnnOnly;
  cfg.mel_bins = 8;
  cfg.mel_frames = 12;
  cfg.hand_dim = 4;
  Model<float> model(cfg);
  model.init_params(Rng(51));
  // Hand branch contributes nothing; fusion/head pass the GAP value through.
  model.params().at("hand.fc1.w").fill(0.0f);
  model.params().at("hand.fc1.b").fill(0.0f);
  model.params().at("hand.fc2.w").fill(0.0f);
  model.params().at("hand.fc2.b").fill(0.0f);
  model.params().at("fusion.w").fill(0.0f);
  // fused layout: [gap(1), hand(2)]; route gap -> fusion unit 0, positively
  model.params().at("fusion.w").v[0] = 1.0f;
  model.params().at("fusion.b").fill(0.0f);
  model.params().at("head.w").fill(0.0f);
  model.params().at("head.w").v[0 * cfg.n_classes + 0] = 1.0f;  // logit_0 = fusion_relu[0]
  model.params().at("head.b").fill(0.0f);

  Tensor<float> mel = random_tensor({1, cfg.mel_bins, cfg.mel_frames}, 52);
  Tensor<float> hand = random_tensor({1, cfg.hand_dim}, 53);

  AttributionMap a = grad_cam(model, mel, hand, 0);

  Trace<float> tr = model.forward(mel, hand, Mode::eval);
  const Tensor<float>& A = tr.conv_feature();
  std::vector<float> expect(A.v.size());
  for (size_t i = 0; i < A.v.size(); ++i) expect[i] = std::max(A.v[i], 0.0f);
  float lo = expect[0], hi = expect[0];
  for (float v : expect) {
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  REQUIRE(hi > lo);
  for (float& v : expect) v = (v - lo) / (hi - lo);

  auto up =
      xai::detail::bilinear_upsample(expect, A.dim(1), A.dim(2), cfg.mel_bins, cfg.mel_frames);
  REQUIRE(a.values.size() == up.size());
  for (size_t i = 0; i < up.size(); ++i)
    CHECK(a.values[i] == doctest::Approx(up[i]).epsilon(1e-4));
}

TEST_CASE("gradcam: HandcraftedOnly variant is rejected") {
  ModelConfig cfg = small_config(Variant::HandcraftedOnly);
  Model<float> model(cfg);
  model.init_params(Rng(61));
  Tensor<float> hand = random_tensor({1, cfg.hand_dim}, 62);
  CHECK_THROWS_AS(grad_cam(model, Tensor<float>(), hand, 0), respira::Error);
}

TEST_CASE("xai: attribution calls leave parameters bit-unchanged") {
  ModelConfig cfg = small_config();
  Model<float> model(cfg);
  model.init_params(Rng(71));
  auto before = serialize_params(model);

  Tensor<float> mel = random_tensor({1, cfg.mel_bins, cfg.mel_frames}, 72);
  Tensor<float> hand = random_tensor({1, cfg.hand_dim}, 73);
  Tensor<float> baseline({1, cfg.mel_bins, cfg.mel_frames});
  (void)grad_cam(model, mel, hand, 1);
  (void)integrated_gradients(model, mel, hand, baseline, 1, 8);

  CHECK(serialize_params(model) == before);
}
