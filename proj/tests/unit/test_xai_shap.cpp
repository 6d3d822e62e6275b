#include <doctest.h>

#include <cmath>
#include <set>
#include <vector>

#include "respira/core/rng.hpp"
#include "respira/xai/importance.hpp"
#include "respira/xai/shap.hpp"

using namespace respira;
using namespace respira::xai;

namespace {

// Nonlinear but cheap test predictor over n features.
PredictFn toy_predictor(int n, uint64_t seed) {
  Rng rng(seed);
  auto w = std::make_shared<std::vector<double>>(static_cast<size_t>(n));
  auto q = std::make_shared<std::vector<double>>(static_cast<size_t>(n));
  for (auto& v : *w) v = rng.gaussian();
  for (auto& v : *q) v = 0.3 * rng.gaussian();
  return [w, q](const std::vector<double>& x) {
    double acc = 0.0;
    for (size_t i = 0; i < x.size(); ++i) acc += (*w)[i] * x[i] + (*q)[i] * x[i] * x[i];
    acc += 0.5 * std::tanh(x[0] * x[x.size() - 1]);
    return acc;
  };
}

}  // namespace

TEST_CASE("shap_exact: linear model gives phi_i = w_i (x_i - mean_i) exactly") {
  const int n = 10;
  Rng rng(3);
  std::vector<double> w(n), x(n), bg(n);
  for (int i = 0; i < n; ++i) {
    w[static_cast<size_t>(i)] = rng.gaussian();
    x[static_cast<size_t>(i)] = rng.gaussian();
    bg[static_cast<size_t>(i)] = rng.gaussian();
  }
  PredictFn f = [&w](const std::vector<double>& z) {
    double acc = 1.7;  // intercept
    for (size_t i = 0; i < z.size(); ++i) acc += w[i] * z[i];
    return acc;
  };
  ShapResult r = shap_exact(f, x, bg);
  for (int i = 0; i < n; ++i)
    CHECK(r.phi[static_cast<size_t>(i)] ==
          doctest::Approx(w[static_cast<size_t>(i)] *
                          (x[static_cast<size_t>(i)] - bg[static_cast<size_t>(i)]))
              .epsilon(1e-10));
}

TEST_CASE("shap_exact: symmetric features receive equal phi") {
  // Features 0 and 1 enter exchangeably and carry identical values.
  std::vector<double> x = {0.8, 0.8, -0.3, 1.2};
  std::vector<double> bg = {0.1, 0.1, 0.0, 0.0};
  PredictFn f = [](const std::vector<double>& z) {
    return z[0] + z[1] + 3.0 * z[0] * z[1] + 0.7 * z[2] - z[3] * z[3];
  };
  ShapResult r = shap_exact(f, x, bg);
  CHECK(r.phi[0] == doctest::Approx(r.phi[1]).epsilon(1e-12));
}

TEST_CASE("shap_exact: efficiency axiom to 1e-9") {
  const int n = 8;
  Rng rng(5);
  std::vector<double> x(n), bg(n);
  for (int i = 0; i < n; ++i) {
    x[static_cast<size_t>(i)] = rng.gaussian();
    bg[static_cast<size_t>(i)] = 0.2 * rng.gaussian();
  }
  PredictFn f = toy_predictor(n, 6);
  ShapResult r = shap_exact(f, x, bg);
  double sum = 0.0;
  for (double p : r.phi) sum += p;
  CHECK(std::abs(sum - (r.f_x - r.f_null)) < 1e-9);
}

TEST_CASE("shap_exact: dummy feature gets exactly zero") {
  std::vector<double> x = {1.0, -2.0, 0.5, 3.0};
  std::vector<double> bg = {0.0, 0.0, 0.0, 0.0};
  PredictFn f = [](const std::vector<double>& z) {
    return 2.0 * z[0] - z[1] + z[0] * z[1];  // ignores z[2], z[3]
  };
  ShapResult r = shap_exact(f, x, bg);
  CHECK(r.phi[2] == 0.0);
  CHECK(r.phi[3] == 0.0);
}

TEST_CASE("shap_exact: refuses more than 14 features") {
  std::vector<double> x(15, 0.0), bg(15, 0.0);
  PredictFn f = [](const std::vector<double>&) { return 0.0; };
  CHECK_THROWS_AS(shap_exact(f, x, bg), respira::Error);
}

TEST_CASE("shap_sampled: agrees with the exact oracle within 3 standard errors") {
  const int n = 10;
  Rng rng(9);
  std::vector<double> x(n), bg(n);
  for (int i = 0; i < n; ++i) {
    x[static_cast<size_t>(i)] = rng.gaussian();
    bg[static_cast<size_t>(i)] = 0.3 * rng.gaussian();
  }
  PredictFn f = toy_predictor(n, 10);
  ShapResult exact = shap_exact(f, x, bg);
  ShapResult sampled = shap_sampled(f, x, bg, 800, Rng(11));
  for (int i = 0; i < n; ++i) {
    INFO("feature " << i);
    double se = std::max(sampled.standard_error[static_cast<size_t>(i)], 1e-12);
    CHECK(std::abs(sampled.phi[static_cast<size_t>(i)] - exact.phi[static_cast<size_t>(i)]) <=
          3.0 * se + 1e-9);
  }
}

TEST_CASE("shap_sampled: standard errors shrink like 1/sqrt(2) when permutations double") {
  const int n = 8;
  Rng rng(13);
  std::vector<double> x(n), bg(n);
  for (int i = 0; i < n; ++i) {
    x[static_cast<size_t>(i)] = rng.gaussian();
    bg[static_cast<size_t>(i)] = 0.0;
  }
  PredictFn f = toy_predictor(n, 14);
  ShapResult a = shap_sampled(f, x, bg, 400, Rng(15));
  ShapResult b = shap_sampled(f, x, bg, 800, Rng(15));
  double mean_a = 0.0, mean_b = 0.0;
  for (int i = 0; i < n; ++i) {
    mean_a += a.standard_error[static_cast<size_t>(i)] / n;
    mean_b += b.standard_error[static_cast<size_t>(i)] / n;
  }
  double ratio = mean_b / mean_a;
  CHECK(ratio == doctest::Approx(1.0 / std::sqrt(2.0)).epsilon(0.2));
}

TEST_CASE("shap_sampled: fixed seed gives identical estimates; floor on permutations") {
  const int n = 6;
  std::vector<double> x(n, 1.0), bg(n, 0.0);
  PredictFn f = toy_predictor(n, 20);
  ShapResult a = shap_sampled(f, x, bg, 150, Rng(21));
  ShapResult b = shap_sampled(f, x, bg, 150, Rng(21));
  CHECK(a.phi == b.phi);
  CHECK(a.standard_error == b.standard_error);
  CHECK_THROWS_AS(shap_sampled(f, x, bg, 50, Rng(22)), respira::Error);
}

TEST_CASE("shap: model predictor equals the full forward logit") {
  nn::ModelConfig cfg;
  cfg.conv_blocks = {{3, 3, 2}};
  cfg.conv_dropout = 0.0;
  cfg.lstm_units = 4;
  cfg.attention_dim = 4;
  cfg.hand_hidden = {4, 4};
  cfg.hand_dropout = 0.0;
  cfg.fusion_hidden = 6;
  cfg.fusion_dropout = 0.0;
  cfg.mel_bins = 8;
  cfg.mel_frames = 16;
  cfg.hand_dim = 6;
  nn::Model<float> model(cfg);
  model.init_params(Rng(30));
  (void)model.forward(nn::Tensor<float>({1, 8, 16}), nn::Tensor<float>({1, 6}),
                      nn::Mode::train);  // move BN running stats off init
  nn::Tensor<float> mel({1, cfg.mel_bins, cfg.mel_frames});
  Rng mrng(33);
  for (auto& v : mel.v) v = static_cast<float>(mrng.gaussian());
  PredictFn f = hand_logit_predictor(model, mel, 2);
  for (int trial = 0; trial < 4; ++trial) {
    nn::Tensor<float> hand({1, cfg.hand_dim});
    std::vector<double> hv(static_cast<size_t>(cfg.hand_dim));
    for (int i = 0; i < cfg.hand_dim; ++i) {
      hv[static_cast<size_t>(i)] = mrng.gaussian();
      hand.v[static_cast<size_t>(i)] = static_cast<float>(hv[static_cast<size_t>(i)]);
    }
    nn::Trace<float> tr = model.forward(mel, hand, nn::Mode::eval);
    CHECK(f(hv) == doctest::Approx(static_cast<double>(tr.logits.v[2])).epsilon(1e-6));
  }
}

TEST_CASE("shap: model predictor with a dead handcrafted branch attributes ~0 everywhere") {
  nn::ModelConfig cfg;
  cfg.conv_blocks = {{3, 3, 2}};
  cfg.conv_dropout = 0.0;
  cfg.lstm_units = 4;
  cfg.attention_dim = 4;
  cfg.hand_hidden = {4, 4};
  cfg.hand_dropout = 0.0;
  cfg.fusion_hidden = 6;
  cfg.fusion_dropout = 0.0;
  cfg.mel_bins = 8;
  cfg.mel_frames = 16;
  cfg.hand_dim = 6;
  nn::Model<float> model(cfg);
  model.init_params(Rng(31));
  model.params().at("hand.fc1.w").fill(0.0f);  // branch ignores its input
  nn::Tensor<float> mel({1, cfg.mel_bins, cfg.mel_frames});
  Rng mrng(32);
  for (auto& v : mel.v) v = static_cast<float>(mrng.gaussian());

  PredictFn f = hand_logit_predictor(model, mel, 0);
  std::vector<double> x(static_cast<size_t>(cfg.hand_dim), 1.0);
  std::vector<double> bg(static_cast<size_t>(cfg.hand_dim), 0.0);
  ShapResult r = shap_exact(f, x, bg);
  for (double p : r.phi) CHECK(std::abs(p) < 1e-9);
}

TEST_CASE("global_importance: top-5 ranking agrees across sampling seeds") {
  // Wire the hand encoder so features 0..4 dominate the logit, then require
  // the two seeded rankings to share at least 60% of their top five.
  nn::ModelConfig cfg;
  cfg.conv_blocks = {{3, 3, 2}};
  cfg.conv_dropout = 0.0;
  cfg.lstm_units = 4;
  cfg.attention_dim = 4;
  cfg.hand_hidden = {8, 8};
  cfg.hand_dropout = 0.0;
  cfg.fusion_hidden = 8;
  cfg.fusion_dropout = 0.0;
  cfg.mel_bins = 8;
  cfg.mel_frames = 16;
  cfg.hand_dim = 70;
  nn::Model<float> model(cfg);
  model.init_params(Rng(51));
  auto& w1 = model.params().at("hand.fc1.w");  // (70, 8)
  w1.fill(0.0f);
  for (int f = 0; f < 5; ++f)
    for (int u = 0; u < 8; ++u)
      w1.v[static_cast<size_t>(f * 8 + u)] = 0.8f + 0.1f * f;

  std::vector<nn::Tensor<float>> mels;
  std::vector<std::vector<double>> hands;
  Rng rng(52);
  for (int s = 0; s < 12; ++s) {
    nn::Tensor<float> mel({1, cfg.mel_bins, cfg.mel_frames});
    for (auto& v : mel.v) v = static_cast<float>(rng.gaussian());
    mels.push_back(std::move(mel));
    std::vector<double> h(70);
    for (auto& v : h) v = rng.gaussian();
    hands.push_back(std::move(h));
  }
  std::vector<double> bg(70, 0.0);

  auto top5 = [](const std::vector<FeatureImportance>& ranking) {
    std::set<int> ids;
    for (int k = 0; k < 5; ++k) ids.insert(ranking[static_cast<size_t>(k)].index);
    return ids;
  };
  auto r1 = top5(global_importance(model, mels, hands, bg, 150, Rng(1001)));
  auto r2 = top5(global_importance(model, mels, hands, bg, 150, Rng(2002)));
  int shared = 0;
  for (int id : r1) shared += r2.count(id);
  CHECK(shared >= 3);  // >= 0.6 agreement
}

TEST_CASE("global_importance: ranked, named, stable length; dead branch ranks ~0") {
  nn::ModelConfig cfg;
  cfg.conv_blocks = {{3, 3, 2}};
  cfg.conv_dropout = 0.0;
  cfg.lstm_units = 4;
  cfg.attention_dim = 4;
  cfg.hand_hidden = {4, 4};
  cfg.hand_dropout = 0.0;
  cfg.fusion_hidden = 6;
  cfg.fusion_dropout = 0.0;
  cfg.mel_bins = 8;
  cfg.mel_frames = 16;
  cfg.hand_dim = 70;  // full handcrafted width so names resolve
  nn::Model<float> model(cfg);
  model.init_params(Rng(41));

  std::vector<nn::Tensor<float>> mels;
  std::vector<std::vector<double>> hands;
  Rng rng(42);
  for (int s = 0; s < 10; ++s) {
    nn::Tensor<float> mel({1, cfg.mel_bins, cfg.mel_frames});
    for (auto& v : mel.v) v = static_cast<float>(rng.gaussian());
    mels.push_back(std::move(mel));
    std::vector<double> h(70);
    for (auto& v : h) v = rng.gaussian();
    hands.push_back(std::move(h));
  }
  std::vector<double> bg(70, 0.0);
  auto ranking = global_importance(model, mels, hands, bg, 120, Rng(43));
  REQUIRE(ranking.size() == 70);
  for (size_t i = 1; i < ranking.size(); ++i)
    CHECK(ranking[i - 1].mean_abs_phi >= ranking[i].mean_abs_phi);
  CHECK(!ranking[0].name.empty());

  // With zeroed hand weights every importance collapses to ~0.
  model.params().at("hand.fc1.w").fill(0.0f);
  auto dead = global_importance(model, mels, hands, bg, 120, Rng(44));
  for (const auto& fi : dead) CHECK(fi.mean_abs_phi < 1e-9);
}
