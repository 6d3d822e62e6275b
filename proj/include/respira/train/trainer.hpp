#pragma once
#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "respira/audio/augment.hpp"
#include "respira/core/error.hpp"
#include "respira/core/rng.hpp"
#include "respira/dsp/handcrafted.hpp"
#include "respira/dsp/mel.hpp"
#include "respira/eval/metrics.hpp"
#include "respira/nn/checkpoint.hpp"
#include "respira/nn/model.hpp"
#include "respira/train/adam.hpp"
#include "respira/train/loss.hpp"
#include "respira/train/manifest.hpp"
#include "respira/train/schedule.hpp"
#include "respira/train/split.hpp"

namespace respira::train {

struct TrainConfig {
  double lr0 = 3e-4;
  int batch = 16;
  int max_epochs = 80;
  double plateau_factor = 0.5;
  int plateau_patience = 4;
  double plateau_min_delta = 1e-4;
  int early_stop_patience = 12;
  double label_smoothing = 0.05;
  double l2 = 1e-4;
  double clip_norm = 5.0;
  uint64_t seed = 0;

  void validate() const {
    if (batch < 1) throw data_error("train config: batch must be >= 1");
    if (max_epochs < 1) throw data_error("train config: max_epochs must be >= 1");
    if (lr0 <= 0) throw data_error("train config: lr0 must be positive");
    if (label_smoothing < 0 || label_smoothing >= 1)
      throw data_error("train config: label_smoothing must lie in [0, 1)");
  }
};

// One training sample, fully featurized. The z-scored waveform is retained so
// train-time augmentation can recompute features; val/test samples may leave
// it empty.
struct TrainSample {
  std::string clip_id;
  int label = -1;
  std::vector<float> wave;          // z-scored 64,000 samples (train split)
  std::vector<float> mel;           // 128 x 247 row-major
  std::array<float, dsp::kHandDim> hand{};
  Partition partition = Partition::train;
};

struct EpochLog {
  int epoch = 0;
  double train_loss = 0.0;  // optimized objective (smoothed SCCE + L2)
  double train_accuracy = 0.0;
  double val_loss = 0.0;  // smoothed SCCE only
  double val_accuracy = 0.0;
  double val_macro_f1 = 0.0;
  double lr = 0.0;

  nlohmann::json to_json() const {
    return {{"epoch", epoch},
            {"train_loss", train_loss},
            {"train_accuracy", train_accuracy},
            {"val_loss", val_loss},
            {"val_accuracy", val_accuracy},
            {"val_macro_f1", val_macro_f1},
            {"lr", lr}};
  }
};

struct TrainResult {
  nn::Model<float> best_model;
  nn::CheckpointMeta best_meta;
  std::vector<EpochLog> logs;
  // instrumentation
  int64_t augmented_train_samples = 0;
  int64_t augmented_other_samples = 0;  // must stay 0
  double max_postclip_grad_norm = 0.0;
  bool early_stopped = false;
};

namespace detail {

template <typename It>
void fill_batch(const std::vector<TrainSample>& samples, It begin, It end,
                const nn::ModelConfig& cfg, nn::Tensor<float>& mel, nn::Tensor<float>& hand,
                std::vector<int>& labels) {
  const int n = static_cast<int>(end - begin);
  const size_t mel_len = static_cast<size_t>(cfg.mel_bins) * cfg.mel_frames;
  const size_t hand_len = static_cast<size_t>(cfg.hand_dim);
  mel = nn::Tensor<float>({n, cfg.mel_bins, cfg.mel_frames});
  hand = nn::Tensor<float>({n, cfg.hand_dim});
  labels.resize(static_cast<size_t>(n));
  for (int i = 0; i < n; ++i) {
    const TrainSample& s = samples[static_cast<size_t>(*(begin + i))];
    if (s.mel.size() != mel_len) throw data_error("batch: sample mel size does not match config");
    if (hand_len > s.hand.size()) throw data_error("batch: config hand_dim exceeds feature width");
    std::copy(s.mel.begin(), s.mel.end(), mel.v.begin() + static_cast<int64_t>(i) * mel_len);
    std::copy_n(s.hand.begin(), hand_len, hand.v.begin() + static_cast<int64_t>(i) * hand_len);
    labels[static_cast<size_t>(i)] = s.label;
  }
}

struct EvalOutcome {
  double loss = 0.0;
  double accuracy = 0.0;
  double macro_f1 = 0.0;
  std::vector<int> predicted;
  std::vector<int> truth;
  std::vector<double> probs;  // row-major n x 5
};

inline EvalOutcome evaluate_partition(nn::Model<float>& model,
                                      const std::vector<TrainSample>& samples,
                                      const std::vector<int>& indices, double label_smoothing,
                                      int batch) {
  EvalOutcome out;
  const auto& cfg = model.config();
  double loss_sum = 0.0;
  for (size_t start = 0; start < indices.size(); start += static_cast<size_t>(batch)) {
    size_t stop = std::min(indices.size(), start + static_cast<size_t>(batch));
    nn::Tensor<float> mel, hand;
    std::vector<int> labels;
    fill_batch(samples, indices.begin() + static_cast<int64_t>(start),
               indices.begin() + static_cast<int64_t>(stop), cfg, mel, hand, labels);
    nn::Trace<float> tr = model.forward(mel, hand, nn::Mode::eval);
    auto lr = smoothed_scce(tr.probs, labels, label_smoothing);
    loss_sum += lr.value * static_cast<double>(labels.size());
    for (size_t i = 0; i < labels.size(); ++i) {
      const float* row = tr.probs.data() + static_cast<int64_t>(i) * cfg.n_classes;
      int arg = 0;
      for (int c = 1; c < cfg.n_classes; ++c)
        if (row[c] > row[arg]) arg = c;
      out.predicted.push_back(arg);
      out.truth.push_back(labels[i]);
      for (int c = 0; c < cfg.n_classes; ++c) out.probs.push_back(row[c]);
    }
  }
  out.loss = loss_sum / static_cast<double>(indices.size());
  int64_t correct = 0;
  for (size_t i = 0; i < out.truth.size(); ++i) correct += out.truth[i] == out.predicted[i];
  out.accuracy = static_cast<double>(correct) / static_cast<double>(out.truth.size());
  out.macro_f1 = eval::class_metrics(eval::confusion(out.truth, out.predicted)).macro_f1;
  return out;
}

}  // namespace detail

// Adam + plateau lr schedule + early stopping + best-F1 checkpointing, fully
// deterministic for a fixed seed. Augmentation touches the train split only;
// the returned model is the epoch snapshot with the highest validation
// macro-F1.
inline TrainResult fit(std::vector<TrainSample>& samples, const nn::ModelConfig& model_cfg,
                         const TrainConfig& train_cfg, const audio::AugmentPolicy& augment_policy) {
  train_cfg.validate();
  model_cfg.validate();

  std::vector<int> train_idx, val_idx;
  for (size_t i = 0; i < samples.size(); ++i) {
    if (samples[i].partition == Partition::train) train_idx.push_back(static_cast<int>(i));
    if (samples[i].partition == Partition::val) val_idx.push_back(static_cast<int>(i));
  }
  if (train_idx.empty()) throw data_error("train: empty train partition");
  if (val_idx.empty()) throw data_error("train: empty val partition");

  Rng root(train_cfg.seed);
  nn::Model<float> model(model_cfg);
  model.init_params(root.derive("init"));

  TrainResult result;
  result.best_model = nn::Model<float>(model_cfg);
  Adam<float> optimizer;
  PlateauScheduler plateau(train_cfg.lr0, train_cfg.plateau_factor, train_cfg.plateau_patience,
                           train_cfg.plateau_min_delta);
  EarlyStopping stopper(train_cfg.early_stop_patience);
  double best_f1 = -1.0;

  const bool augment_enabled =
      augment_policy.p_stretch > 0 || augment_policy.p_pitch > 0 || augment_policy.p_noise > 0;

  for (int epoch = 1; epoch <= train_cfg.max_epochs; ++epoch) {
    std::vector<int> order = train_idx;
    Rng shuffle_rng = root.derive("shuffle", static_cast<uint64_t>(epoch));
    shuffle_rng.shuffle(order);

    double train_loss_sum = 0.0;
    int64_t train_correct = 0;
    int batch_index = 0;

    for (size_t start = 0; start < order.size(); start += static_cast<size_t>(train_cfg.batch)) {
      size_t stop = std::min(order.size(), start + static_cast<size_t>(train_cfg.batch));
      const int n = static_cast<int>(stop - start);

      const size_t mel_len = static_cast<size_t>(model_cfg.mel_bins) * model_cfg.mel_frames;
      const size_t hand_len = static_cast<size_t>(model_cfg.hand_dim);
      nn::Tensor<float> mel({n, model_cfg.mel_bins, model_cfg.mel_frames});
      nn::Tensor<float> hand({n, model_cfg.hand_dim});
      std::vector<int> labels(static_cast<size_t>(n));

      for (int i = 0; i < n; ++i) {
        TrainSample& s = samples[static_cast<size_t>(order[start + static_cast<size_t>(i)])];
        labels[static_cast<size_t>(i)] = s.label;
        bool use_cached = true;
        if (augment_enabled && !s.wave.empty()) {
          if (model_cfg.mel_bins != dsp::kMelBands || model_cfg.mel_frames != dsp::kStftFrames ||
              model_cfg.hand_dim != dsp::kHandDim)
            throw data_error("train: augmentation requires the standard 128x247 mel / 70-dim "
                             "hand feature geometry");
          Rng aug_rng = root.derive("augment", static_cast<uint64_t>(epoch),
                                    static_cast<uint64_t>(order[start + static_cast<size_t>(i)]));
          audio::AugmentPlan plan = audio::draw_augment_plan(augment_policy, aug_rng);
          if (plan.any()) {
            audio::StandardClip clip;
            clip.stage = audio::StandardClip::Stage::zscored;
            clip.samples = s.wave;
            if (plan.do_stretch) clip = audio::time_stretch(clip, plan.rate);
            if (plan.do_pitch) clip = audio::pitch_shift(clip, plan.semitones);
            if (plan.do_noise) {
              Rng noise_rng = aug_rng.derive("noise");
              clip = audio::add_noise(clip, plan.snr_db, noise_rng);
            }
            dsp::MelSpectrogram m = dsp::mel_spectrogram(clip);
            dsp::HandcraftedVector h = dsp::handcrafted_vector(clip);
            std::copy(m.values.begin(), m.values.end(),
                      mel.v.begin() + static_cast<int64_t>(i) * mel_len);
            std::copy(h.values.begin(), h.values.end(),
                      hand.v.begin() + static_cast<int64_t>(i) * hand_len);
            result.augmented_train_samples++;
            use_cached = false;
          }
        }
        if (use_cached) {
          if (s.mel.size() != mel_len)
            throw data_error("train: sample mel size does not match config");
          if (hand_len > s.hand.size())
            throw data_error("train: config hand_dim exceeds feature width");
          std::copy(s.mel.begin(), s.mel.end(),
                    mel.v.begin() + static_cast<int64_t>(i) * mel_len);
          std::copy_n(s.hand.begin(), hand_len,
                      hand.v.begin() + static_cast<int64_t>(i) * hand_len);
        }
      }

      Rng dropout_rng = root.derive("dropout", static_cast<uint64_t>(epoch),
                                    static_cast<uint64_t>(batch_index));
      nn::Trace<float> tr = model.forward(mel, hand, nn::Mode::train, dropout_rng);
      auto lr = smoothed_scce(tr.probs, labels, train_cfg.label_smoothing);
      double objective = lr.value + l2_penalty(model.params(), train_cfg.l2);
      if (!std::isfinite(objective))
        throw numeric_error("train: non-finite loss at epoch " + std::to_string(epoch) +
                            ", batch " + std::to_string(batch_index));
      train_loss_sum += objective * n;

      for (int i = 0; i < n; ++i) {
        const float* row = tr.probs.data() + static_cast<int64_t>(i) * model_cfg.n_classes;
        int arg = 0;
        for (int c = 1; c < model_cfg.n_classes; ++c)
          if (row[c] > row[arg]) arg = c;
        train_correct += arg == labels[static_cast<size_t>(i)];
      }

      nn::Gradients<float> grads = model.backward(tr, lr.dlogits);
      add_l2_gradient(model.params(), train_cfg.l2, grads);
      double pre_norm = clip_global_norm(model.params(), grads, train_cfg.clip_norm);
      result.max_postclip_grad_norm =
          std::max(result.max_postclip_grad_norm, std::min(pre_norm, train_cfg.clip_norm));
      optimizer.step(model.params(), grads, plateau.lr());
      ++batch_index;
    }

    detail::EvalOutcome val = detail::evaluate_partition(model, samples, val_idx,
                                                         train_cfg.label_smoothing, train_cfg.batch);

    EpochLog log;
    log.epoch = epoch;
    log.train_loss = train_loss_sum / static_cast<double>(order.size());
    log.train_accuracy = static_cast<double>(train_correct) / static_cast<double>(order.size());
    log.val_loss = val.loss;
    log.val_accuracy = val.accuracy;
    log.val_macro_f1 = val.macro_f1;
    log.lr = plateau.lr();
    result.logs.push_back(log);

    if (val.macro_f1 > best_f1) {
      best_f1 = val.macro_f1;
      result.best_model = model;  // snapshot parameters
      result.best_meta.epoch = epoch;
      result.best_meta.val_macro_f1 = val.macro_f1;
      result.best_meta.val_loss = val.loss;
      result.best_meta.seed = train_cfg.seed;
      result.best_meta.class_names = class_names();
    }

    plateau.step(val.loss);
    if (stopper.step(val.macro_f1)) {
      result.early_stopped = true;
      break;
    }
  }
  return result;
}

}  // namespace respira::train
