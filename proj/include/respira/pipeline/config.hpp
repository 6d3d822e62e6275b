#pragma once
#include <filesystem>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "respira/audio/augment.hpp"
#include "respira/audio/quality.hpp"
#include "respira/core/error.hpp"
#include "respira/nn/model.hpp"
#include "respira/train/trainer.hpp"

namespace respira::pipeline {

// XAI knobs; defaults documented in the README.
struct XaiConfig {
  int ig_steps = 64;
  int shap_permutations = 200;
  int shap_background = 50;      // training samples behind mean imputation
  int pixel_shap_baselines = 8;  // noise-perturbed silent baselines, averaged
};

// Full run configuration; file schema is strict (unknown keys rejected).
struct RunConfig {
  std::filesystem::path manifest;
  std::filesystem::path workdir;
  uint64_t seed = 1;
  int replicates = 1;
  audio::QcConfig qc;
  audio::AugmentPolicy augment;
  nn::ModelConfig model;
  train::TrainConfig training;
  XaiConfig xai;
};

namespace detail {

inline void reject_unknown_keys(const nlohmann::json& j, const std::set<std::string>& allowed,
                                const std::string& where) {
  if (!j.is_object()) throw usage_error("config: '" + where + "' must be an object");
  for (auto it = j.begin(); it != j.end(); ++it)
    if (!allowed.count(it.key()))
      throw usage_error("config: unknown key '" + it.key() + "' in " + where);
}

template <typename T>
void maybe(const nlohmann::json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

inline void maybe_range(const nlohmann::json& j, const char* key, double& lo, double& hi) {
  if (!j.contains(key)) return;
  auto arr = j.at(key);
  if (!arr.is_array() || arr.size() != 2)
    throw usage_error(std::string("config: '") + key + "' must be a [lo, hi] pair");
  lo = arr[0].get<double>();
  hi = arr[1].get<double>();
}

}  // namespace detail

inline RunConfig run_config_from_json(const nlohmann::json& j,
                                      const std::filesystem::path& base_dir) {
  using detail::maybe;
  using detail::maybe_range;
  using detail::reject_unknown_keys;

  reject_unknown_keys(j, {"seed", "replicates", "paths", "preprocessing", "augmentation", "model",
                          "training", "xai"},
                      "top level");
  RunConfig cfg;
  maybe(j, "seed", cfg.seed);
  maybe(j, "replicates", cfg.replicates);
  if (cfg.replicates < 1) throw usage_error("config: replicates must be >= 1");

  if (j.contains("paths")) {
    const auto& p = j.at("paths");
    reject_unknown_keys(p, {"manifest", "workdir"}, "paths");
    if (p.contains("manifest")) {
      std::filesystem::path m = p.at("manifest").get<std::string>();
      cfg.manifest = m.is_absolute() ? m : base_dir / m;
    }
    if (p.contains("workdir")) {
      std::filesystem::path w = p.at("workdir").get<std::string>();
      cfg.workdir = w.is_absolute() ? w : base_dir / w;
    }
  }

  if (j.contains("preprocessing")) {
    const auto& p = j.at("preprocessing");
    reject_unknown_keys(p, {"threshold_clip", "threshold_snr_db"}, "preprocessing");
    maybe(p, "threshold_clip", cfg.qc.threshold_clip);
    maybe(p, "threshold_snr_db", cfg.qc.threshold_snr_db);
  }

  if (j.contains("augmentation")) {
    const auto& a = j.at("augmentation");
    reject_unknown_keys(a,
                        {"p_stretch", "p_pitch", "p_noise", "stretch_range",
                         "pitch_range_semitones", "snr_range_db"},
                        "augmentation");
    maybe(a, "p_stretch", cfg.augment.p_stretch);
    maybe(a, "p_pitch", cfg.augment.p_pitch);
    maybe(a, "p_noise", cfg.augment.p_noise);
    maybe_range(a, "stretch_range", cfg.augment.stretch_lo, cfg.augment.stretch_hi);
    maybe_range(a, "pitch_range_semitones", cfg.augment.pitch_lo_semitones,
                cfg.augment.pitch_hi_semitones);
    maybe_range(a, "snr_range_db", cfg.augment.snr_lo_db, cfg.augment.snr_hi_db);
    cfg.augment.validate();
  }

  if (j.contains("model")) {
    const auto& m = j.at("model");
    reject_unknown_keys(m,
                        {"variant", "conv_filters", "kernel_size", "conv_dropout", "lstm_units",
                         "attention_dim", "hand_hidden", "hand_dropout", "fusion_hidden",
                         "fusion_dropout"},
                        "model");
    if (m.contains("variant"))
      cfg.model.variant = nn::variant_from_name(m.at("variant").get<std::string>());
    if (m.contains("conv_filters")) {
      auto filters = m.at("conv_filters").get<std::vector<int>>();
      int kernel = 3;
      maybe(m, "kernel_size", kernel);
      cfg.model.conv_blocks.clear();
      for (int f : filters) cfg.model.conv_blocks.push_back({f, kernel, 2});
    } else if (m.contains("kernel_size")) {
      int kernel = m.at("kernel_size").get<int>();
      for (auto& b : cfg.model.conv_blocks) b.kernel = kernel;
    }
    maybe(m, "conv_dropout", cfg.model.conv_dropout);
    maybe(m, "lstm_units", cfg.model.lstm_units);
    maybe(m, "attention_dim", cfg.model.attention_dim);
    maybe(m, "hand_hidden", cfg.model.hand_hidden);
    maybe(m, "hand_dropout", cfg.model.hand_dropout);
    maybe(m, "fusion_hidden", cfg.model.fusion_hidden);
    maybe(m, "fusion_dropout", cfg.model.fusion_dropout);
    cfg.model.validate();
  }

  if (j.contains("training")) {
    const auto& t = j.at("training");
    reject_unknown_keys(t,
                        {"lr0", "batch", "max_epochs", "plateau_factor", "plateau_patience",
                         "plateau_min_delta", "early_stop_patience", "label_smoothing", "l2",
                         "clip_norm"},
                        "training");
    maybe(t, "lr0", cfg.training.lr0);
    maybe(t, "batch", cfg.training.batch);
    maybe(t, "max_epochs", cfg.training.max_epochs);
    maybe(t, "plateau_factor", cfg.training.plateau_factor);
    maybe(t, "plateau_patience", cfg.training.plateau_patience);
    maybe(t, "plateau_min_delta", cfg.training.plateau_min_delta);
    maybe(t, "early_stop_patience", cfg.training.early_stop_patience);
    maybe(t, "label_smoothing", cfg.training.label_smoothing);
    maybe(t, "l2", cfg.training.l2);
    maybe(t, "clip_norm", cfg.training.clip_norm);
    cfg.training.validate();
  }

  if (j.contains("xai")) {
    const auto& x = j.at("xai");
    reject_unknown_keys(
        x, {"ig_steps", "shap_permutations", "shap_background", "pixel_shap_baselines"}, "xai");
    maybe(x, "ig_steps", cfg.xai.ig_steps);
    maybe(x, "shap_permutations", cfg.xai.shap_permutations);
    maybe(x, "shap_background", cfg.xai.shap_background);
    maybe(x, "pixel_shap_baselines", cfg.xai.pixel_shap_baselines);
  }

  cfg.training.seed = cfg.seed;
  return cfg;
}

inline RunConfig load_run_config(const std::filesystem::path& path) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(read_file_text(path));
  } catch (const nlohmann::json::exception& e) {
    throw usage_error("config is not valid JSON: " + std::string(e.what()));
  }
  return run_config_from_json(j, path.parent_path());
}

}  // namespace respira::pipeline
