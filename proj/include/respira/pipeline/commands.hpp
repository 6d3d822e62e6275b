#pragma once
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "respira/audio/quality.hpp"
#include "respira/audio/standardize.hpp"
#include "respira/audio/wav.hpp"
#include "respira/core/binio.hpp"
#include "respira/core/error.hpp"
#include "respira/core/parallel.hpp"
#include "respira/dsp/handcrafted.hpp"
#include "respira/dsp/mel.hpp"
#include "respira/eval/metrics.hpp"
#include "respira/nn/checkpoint.hpp"
#include "respira/pipeline/config.hpp"
#include "respira/pipeline/feature_store.hpp"
#include "respira/report/figures.hpp"
#include "respira/train/split.hpp"
#include "respira/train/trainer.hpp"
#include "respira/xai/gradcam.hpp"
#include "respira/xai/importance.hpp"
#include "respira/xai/integrated_gradients.hpp"
#include "respira/xai/shap.hpp"

namespace respira::pipeline {

// --------------------------------------------------------------------------
// logging (stderr only; all machine-readable output goes to files)
// --------------------------------------------------------------------------
inline int log_verbosity() {
  static int level = [] {
    const char* env = std::getenv("RESPIRA_LOG");
    if (!env) return 1;
    std::string v(env);
    if (v == "quiet") return 0;
    if (v == "debug") return 2;
    return 1;
  }();
  return level;
}

inline void log_info(const std::string& msg) {
  if (log_verbosity() >= 1) std::cerr << "[respira] " << msg << "\n";
}
inline void log_debug(const std::string& msg) {
  if (log_verbosity() >= 2) std::cerr << "[respira:debug] " << msg << "\n";
}

// Advisory single-writer lock on a workdir.
class WorkdirLock {
public:
  explicit WorkdirLock(const std::filesystem::path& workdir)
      : path_(workdir / ".lock") {
    std::filesystem::create_directories(workdir);
    if (std::filesystem::exists(path_))
      throw data_error("workdir is locked by another command (remove " + path_.string() +
                       " if stale)");
    std::ofstream out(path_);
    out << "locked\n";
  }
  ~WorkdirLock() {
    std::error_code ec;
    std::filesystem::remove(path_, ec);
  }
  WorkdirLock(const WorkdirLock&) = delete;
  WorkdirLock& operator=(const WorkdirLock&) = delete;

private:
  std::filesystem::path path_;
};

// --------------------------------------------------------------------------
// preprocess: decode -> standardize -> QC -> featurize -> persist
// --------------------------------------------------------------------------
struct PreprocessOutcome {
  int accepted = 0;
  int rejected = 0;
  int failed = 0;
};

inline PreprocessOutcome cmd_preprocess(const std::filesystem::path& manifest_path,
                                        const std::filesystem::path& workdir,
                                        const audio::QcConfig& qc_cfg) {
  train::DatasetManifest manifest = train::load_manifest(manifest_path);
  WorkdirLock lock(workdir);
  std::filesystem::create_directories(workdir / "clips");

  struct ClipResult {
    bool ok = false;
    bool accepted = false;
    std::string error;
    audio::QcReport qc;
    std::vector<float> wave;
    std::vector<float> mel;
    std::array<float, dsp::kHandDim> hand{};
  };
  std::vector<ClipResult> results(manifest.entries.size());

  parallel_for(static_cast<int64_t>(manifest.entries.size()), [&](int64_t i) {
    const auto& entry = manifest.entries[static_cast<size_t>(i)];
    ClipResult& r = results[static_cast<size_t>(i)];
    try {
      auto bytes = read_file_bytes(manifest.resolve(entry));
      audio::RawRecording rec = audio::decode_wav(bytes);
      audio::StandardClip peak = audio::standardize_peak(rec);
      r.qc = audio::quality_check(peak, qc_cfg);
      r.ok = true;
      if (!r.qc.accept) return;
      audio::StandardClip clip = audio::zscore(peak);
      dsp::MelSpectrogram mel = dsp::mel_spectrogram(clip);
      dsp::HandcraftedVector hand = dsp::handcrafted_vector(peak);
      r.accepted = true;
      r.wave = std::move(clip.samples);
      r.mel = std::move(mel.values);
      r.hand = hand.values;
    } catch (const std::exception& e) {
      r.error = e.what();
    }
  });

  FeatureStore store;
  store.workdir = workdir;
  nlohmann::json rejected = nlohmann::json::array();
  nlohmann::json errors = nlohmann::json::array();
  std::array<int, train::kNumClasses> class_counts{};
  std::array<int, train::kNumClasses> accepted_counts{};
  PreprocessOutcome outcome;

  std::string hand_csv = "clip_id,label";
  for (const auto& name : dsp::handcrafted_feature_names()) hand_csv += "," + name;
  hand_csv += "\n";

  for (size_t i = 0; i < manifest.entries.size(); ++i) {
    const auto& entry = manifest.entries[i];
    ClipResult& r = results[i];
    class_counts[static_cast<size_t>(entry.label)]++;
    if (!r.ok) {
      outcome.failed++;
      errors.push_back({{"clip_id", entry.clip_id}, {"error", r.error}});
      continue;
    }
    if (!r.accepted) {
      outcome.rejected++;
      rejected.push_back({{"clip_id", entry.clip_id}, {"reason", r.qc.reason}});
      continue;
    }
    outcome.accepted++;
    accepted_counts[static_cast<size_t>(entry.label)]++;

    StoreRecord rec;
    rec.clip_id = entry.clip_id;
    rec.label = entry.label;
    rec.patient_id = entry.patient_id;
    rec.source = entry.path;
    rec.wave_file = "clips/" + entry.clip_id + ".f32";
    rec.qc = r.qc;
    rec.mel_offset = store.blob.size() * 4;
    store.blob.insert(store.blob.end(), r.mel.begin(), r.mel.end());
    rec.hand_offset = store.blob.size() * 4;
    store.blob.insert(store.blob.end(), r.hand.begin(), r.hand.end());
    store.records.push_back(rec);

    write_f32_vector(workdir / rec.wave_file, r.wave);
    nlohmann::json sidecar = {{"source", entry.path},
                              {"stage", "zscored"},
                              {"qc_verdict", "accept"}};
    write_file_text(workdir / "clips" / (entry.clip_id + ".json"), sidecar.dump() + "\n");

    hand_csv += entry.clip_id + "," + train::class_names()[static_cast<size_t>(entry.label)];
    for (float v : r.hand) {
      char buf[32];
      std::snprintf(buf, sizeof(buf), ",%.9g", static_cast<double>(v));
      hand_csv += buf;
    }
    hand_csv += "\n";
  }

  if (store.records.empty())
    throw data_error("preprocess: no clips survived decoding and quality control");
  save_feature_store(store);
  write_file_text(workdir / "features" / "handcrafted.csv", hand_csv);

  nlohmann::json per_class = nlohmann::json::object();
  nlohmann::json per_class_accepted = nlohmann::json::object();
  for (int c = 0; c < train::kNumClasses; ++c) {
    per_class[train::class_names()[static_cast<size_t>(c)]] = class_counts[static_cast<size_t>(c)];
    per_class_accepted[train::class_names()[static_cast<size_t>(c)]] =
        accepted_counts[static_cast<size_t>(c)];
  }
  nlohmann::json summary = {
      {"total", manifest.entries.size()},
      {"per_class", per_class},
      {"accepted", outcome.accepted},
      {"accepted_per_class", per_class_accepted},
      {"rejected", rejected},
      {"failed", errors},
      {"qc", {{"threshold_clip", qc_cfg.threshold_clip}, {"threshold_snr_db", qc_cfg.threshold_snr_db}}}};
  write_file_text(workdir / "preprocess_summary.json", summary.dump(2) + "\n");
  log_info("preprocess: " + std::to_string(outcome.accepted) + " accepted, " +
           std::to_string(outcome.rejected) + " rejected, " + std::to_string(outcome.failed) +
           " failed");
  return outcome;
}

// --------------------------------------------------------------------------
// sample assembly
// --------------------------------------------------------------------------
inline std::vector<train::TrainSample> build_samples(const FeatureStore& store,
                                                     const train::SplitAssignment& split,
                                                     bool load_train_waves) {
  std::vector<train::TrainSample> samples;
  samples.reserve(store.records.size());
  for (const auto& r : store.records) {
    train::TrainSample s;
    s.clip_id = r.clip_id;
    s.label = r.label;
    s.partition = split.of(r.clip_id);
    s.mel.assign(store.mel_of(r), store.mel_of(r) + FeatureStore::kMelLen);
    std::copy_n(store.hand_of(r), FeatureStore::kHandLen, s.hand.begin());
    if (load_train_waves && s.partition == train::Partition::train)
      s.wave = store.wave_of(r);
    samples.push_back(std::move(s));
  }
  return samples;
}

// --------------------------------------------------------------------------
// train (with replicates) and ablate
// --------------------------------------------------------------------------
struct TrainCommandResult {
  train::TrainResult best;  // replicate with the highest validation macro-F1
  nlohmann::json summary;
};

inline train::SplitAssignment load_or_create_split(const FeatureStore& store, uint64_t seed,
                                                   const std::filesystem::path& workdir,
                                                   std::vector<std::string>* notes) {
  auto split_path = workdir / "split.json";
  train::DatasetManifest pseudo;
  for (const auto& r : store.records) {
    train::ManifestEntry e;
    e.clip_id = r.clip_id;
    e.path = r.source;
    e.label = r.label;
    e.patient_id = r.patient_id;
    pseudo.entries.push_back(std::move(e));
  }
  if (!pseudo.has_patient_ids() && notes)
    notes->push_back(
        "manifest has no patient ids; falling back to clip-level stratification (patient-level "
        "partitioning is preferred when ids exist)");
  train::SplitAssignment split = train::split_dataset(pseudo, seed);
  write_file_text(split_path, split.to_json().dump(2) + "\n");
  return split;
}

inline TrainCommandResult cmd_train(const RunConfig& cfg) {
  FeatureStore store = load_feature_store(cfg.workdir);
  WorkdirLock lock(cfg.workdir);

  std::vector<std::string> notes;
  train::SplitAssignment split = load_or_create_split(store, cfg.seed, cfg.workdir, &notes);
  const bool augment_on =
      cfg.augment.p_stretch > 0 || cfg.augment.p_pitch > 0 || cfg.augment.p_noise > 0;
  std::vector<train::TrainSample> samples = build_samples(store, split, augment_on);

  std::filesystem::create_directories(cfg.workdir / "checkpoint");
  nlohmann::json reps = nlohmann::json::array();
  TrainCommandResult out;
  double best_f1 = -1.0;
  int best_rep = -1;

  for (int rep = 0; rep < cfg.replicates; ++rep) {
    train::TrainConfig tc = cfg.training;
    tc.seed = cfg.seed + static_cast<uint64_t>(rep);
    log_info("training replicate " + std::to_string(rep) + " (seed " + std::to_string(tc.seed) +
             ")");
    train::TrainResult r = train::fit(samples, cfg.model, tc, cfg.augment);

    std::string logs_name = cfg.replicates == 1
                                ? "epochs.jsonl"
                                : "epochs_rep" + std::to_string(rep) + ".jsonl";
    std::string jsonl;
    for (const auto& log : r.logs) jsonl += log.to_json().dump() + "\n";
    write_file_text(cfg.workdir / logs_name, jsonl);
    if (cfg.replicates > 1 && r.best_meta.val_macro_f1 > best_f1)
      write_file_text(cfg.workdir / "epochs.jsonl", jsonl);  // best replicate's curve

    reps.push_back({{"seed", tc.seed},
                    {"best_epoch", r.best_meta.epoch},
                    {"val_macro_f1", r.best_meta.val_macro_f1},
                    {"val_loss", r.best_meta.val_loss},
                    {"epochs_run", r.logs.size()},
                    {"early_stopped", r.early_stopped},
                    {"augmented_train_samples", r.augmented_train_samples},
                    {"max_postclip_grad_norm", r.max_postclip_grad_norm},
                    {"logs", logs_name}});
    if (r.best_meta.val_macro_f1 > best_f1) {
      best_f1 = r.best_meta.val_macro_f1;
      best_rep = rep;
      out.best = std::move(r);
    }
  }

  nn::save_checkpoint(out.best.best_model, out.best.best_meta, cfg.workdir / "checkpoint" / "best");

  double mean = 0.0, sq = 0.0;
  for (const auto& r : reps) {
    double f1 = r.at("val_macro_f1").get<double>();
    mean += f1 / cfg.replicates;
    sq += f1 * f1 / cfg.replicates;
  }
  out.summary = {{"replicates", reps},
                 {"best_replicate", best_rep},
                 {"aggregate",
                  {{"mean_val_macro_f1", mean},
                   {"std_val_macro_f1", std::sqrt(std::max(0.0, sq - mean * mean))}}},
                 {"model", nn::model_config_to_json(cfg.model)},
                 {"notes", notes}};
  write_file_text(cfg.workdir / "train_summary.json", out.summary.dump(2) + "\n");
  return out;
}

// --------------------------------------------------------------------------
// evaluate
// --------------------------------------------------------------------------
struct EvaluateResult {
  eval::MetricsReport report;
  eval::ConfusionMatrix cm;
  eval::MulticlassRoc roc;
};

inline EvaluateResult evaluate_checkpoint(nn::Model<float>& model, const FeatureStore& store,
                                          const train::SplitAssignment& split,
                                          train::Partition partition) {
  std::vector<train::TrainSample> samples = build_samples(store, split, false);
  std::vector<int> indices;
  for (size_t i = 0; i < samples.size(); ++i)
    if (samples[i].partition == partition) indices.push_back(static_cast<int>(i));
  if (indices.empty()) throw data_error("evaluate: empty partition");

  auto outcome = train::detail::evaluate_partition(model, samples, indices, 0.0, 16);
  EvaluateResult r;
  r.cm = eval::confusion(outcome.truth, outcome.predicted);
  r.report = eval::class_metrics(r.cm);
  r.roc = eval::roc_auc(outcome.probs, outcome.truth);
  for (int c = 0; c < train::kNumClasses; ++c)
    r.report.per_class[static_cast<size_t>(c)].auc = r.roc.per_class[static_cast<size_t>(c)].auc;
  r.report.macro_auc = r.roc.macro_auc;
  return r;
}

inline nlohmann::json evaluate_to_json(const EvaluateResult& r, train::Partition partition) {
  nlohmann::json j = eval::report_to_json(r.report, &r.roc);
  j["partition"] = train::partition_name(partition);
  j["confusion"] = r.cm.to_json();
  nlohmann::json curves = nlohmann::json::object();
  for (int c = 0; c < train::kNumClasses; ++c) {
    const auto& rc = r.roc.per_class[static_cast<size_t>(c)];
    if (!rc.defined) continue;
    nlohmann::json pts = nlohmann::json::array();
    for (const auto& p : rc.points) {
      double thr = std::isinf(p.threshold) ? 1e308 : p.threshold;
      pts.push_back({p.fpr, p.tpr, thr});
    }
    curves[train::class_names()[static_cast<size_t>(c)]] = pts;
  }
  j["roc_curves"] = curves;
  return j;
}

inline EvaluateResult cmd_evaluate(const std::filesystem::path& workdir,
                                   const std::filesystem::path& checkpoint_stem,
                                   train::Partition partition) {
  FeatureStore store = load_feature_store(workdir);
  WorkdirLock lock(workdir);
  auto split_path = workdir / "split.json";
  if (!std::filesystem::exists(split_path))
    throw data_error("no split.json in workdir (run the train command first)");
  train::SplitAssignment split =
      train::SplitAssignment::from_json(nlohmann::json::parse(read_file_text(split_path)));
  nn::LoadedCheckpoint ckpt = nn::load_checkpoint(checkpoint_stem);

  EvaluateResult r = evaluate_checkpoint(ckpt.model, store, split, partition);
  std::string suffix = std::string("_") + train::partition_name(partition);
  write_file_text(workdir / ("metrics" + suffix + ".json"),
                  evaluate_to_json(r, partition).dump(2) + "\n");
  write_file_text(workdir / ("confusion" + suffix + ".svg"),
                  report::confusion_figure(r.cm, "confusion (" +
                                                     std::string(train::partition_name(partition)) +
                                                     ")"));
  write_file_text(workdir / ("roc" + suffix + ".svg"),
                  report::roc_figure(r.roc, "one-vs-rest ROC (" +
                                                std::string(train::partition_name(partition)) +
                                                ")"));
  log_info("evaluate: accuracy " + report::fmt(r.report.accuracy, 4) + ", macro-F1 " +
           report::fmt(r.report.macro_f1, 4));
  return r;
}

// --------------------------------------------------------------------------
// ablate: the full model plus the four reduced variants under one protocol
// --------------------------------------------------------------------------
inline const std::vector<std::pair<nn::Variant, std::string>>& ablation_lineup() {
  static const std::vector<std::pair<nn::Variant, std::string>> lineup = {
      {nn::Variant::FullHybrid, "None"},
      {nn::Variant::DeepOnly, "Handcrafted Features (HC)"},
      {nn::Variant::HandcraftedOnly, "Deep Spectro-Temporal Branch"},
      {nn::Variant::CnnOnly, "BiLSTM and Attention"},
      {nn::Variant::NoAttention, "Additive Attention"},
  };
  return lineup;
}

inline nlohmann::json cmd_ablate(const RunConfig& cfg) {
  FeatureStore store = load_feature_store(cfg.workdir);
  WorkdirLock lock(cfg.workdir);
  std::vector<std::string> notes;
  train::SplitAssignment split = load_or_create_split(store, cfg.seed, cfg.workdir, &notes);
  const bool augment_on =
      cfg.augment.p_stretch > 0 || cfg.augment.p_pitch > 0 || cfg.augment.p_noise > 0;
  std::vector<train::TrainSample> samples = build_samples(store, split, augment_on);

  nlohmann::json rows = nlohmann::json::array();
  std::string md =
      "| Model Variant | Ablated Component(s) | Test Accuracy | Macro F1-score | Macro ROC-AUC "
      "|\n|---|---|---|---|---|\n";

  for (const auto& [variant, ablated] : ablation_lineup()) {
    nn::ModelConfig mc = cfg.model;
    mc.variant = variant;
    train::TrainConfig tc = cfg.training;
    tc.seed = cfg.seed;  // identical protocol and seed across variants
    log_info(std::string("ablate: training ") + nn::variant_name(variant));
    train::TrainResult r = train::fit(samples, mc, tc, cfg.augment);

    auto vdir = cfg.workdir / "ablation" / nn::variant_name(variant);
    std::filesystem::create_directories(vdir);
    nn::save_checkpoint(r.best_model, r.best_meta, vdir / "best");
    std::string jsonl;
    for (const auto& log : r.logs) jsonl += log.to_json().dump() + "\n";
    write_file_text(vdir / "epochs.jsonl", jsonl);

    EvaluateResult ev = evaluate_checkpoint(r.best_model, store, split, train::Partition::test);
    rows.push_back({{"variant", nn::variant_name(variant)},
                    {"ablated", ablated},
                    {"test_accuracy", ev.report.accuracy},
                    {"macro_f1", ev.report.macro_f1},
                    {"macro_roc_auc", ev.report.macro_auc},
                    {"best_epoch", r.best_meta.epoch},
                    {"val_macro_f1", r.best_meta.val_macro_f1}});
    md += "| " + std::string(nn::variant_name(variant)) + " | " + ablated + " | " +
          report::fmt(ev.report.accuracy, 4) + " | " + report::fmt(ev.report.macro_f1, 4) +
          " | " + report::fmt(ev.report.macro_auc, 4) + " |\n";
  }

  nlohmann::json j = {{"rows", rows}, {"seed", cfg.seed}, {"notes", notes}};
  write_file_text(cfg.workdir / "ablation.json", j.dump(2) + "\n");
  write_file_text(cfg.workdir / "ablation.md", md);
  return j;
}

// --------------------------------------------------------------------------
// explain
// --------------------------------------------------------------------------
inline nn::Tensor<float> silent_mel_baseline() {
  audio::StandardClip silence;
  silence.stage = audio::StandardClip::Stage::zscored;
  silence.samples.assign(static_cast<size_t>(audio::kClipSamples), 0.0f);
  dsp::MelSpectrogram mel = dsp::mel_spectrogram(silence);
  nn::Tensor<float> t({1, dsp::kMelBands, dsp::kStftFrames});
  t.v = mel.values;
  return t;
}

// Fraction of absolute attribution mass per frequency band (low < 400 Hz,
// mid 400-2000 Hz, high > 2000 Hz), summarised from the mel band centers.
inline nlohmann::json band_energy_summary(const xai::AttributionMap& a) {
  const auto& centers = dsp::mel_filterbank().center_hz;
  double low = 0.0, mid = 0.0, high = 0.0;
  for (int b = 0; b < dsp::kMelBands; ++b) {
    double band = 0.0;
    for (int t = 0; t < dsp::kStftFrames; ++t)
      band += std::abs(a.values[static_cast<size_t>(b) * dsp::kStftFrames + static_cast<size_t>(t)]);
    double hz = centers[static_cast<size_t>(b)];
    (hz < 400.0 ? low : hz <= 2000.0 ? mid : high) += band;
  }
  double total = low + mid + high;
  if (total <= 0.0) total = 1.0;
  return {{"low_below_400hz", low / total},
          {"mid_400_2000hz", mid / total},
          {"high_above_2000hz", high / total}};
}

inline void write_attribution(const std::filesystem::path& dir, const std::string& clip_id,
                              const xai::AttributionMap& a) {
  std::string stem = clip_id + "_" + a.method;
  nlohmann::json j = {{"method", a.method},
                      {"clip_id", clip_id},
                      {"target_class", train::class_names()[static_cast<size_t>(a.target_class)]},
                      {"shape", a.shape},
                      {"baseline", a.baseline},
                      {"diagnostics", a.diagnostics},
                      {"payload", stem + ".bin"},
                      {"dtype", "float32"}};
  if (a.shape == std::vector<int>{dsp::kMelBands, dsp::kStftFrames})
    j["band_energy_fractions"] = band_energy_summary(a);
  write_file_text(dir / (stem + ".json"), j.dump(2) + "\n");
  write_file_bytes(dir / (stem + ".bin"), a.values.data(), a.values.size() * 4);
}

struct ExplainRequest {
  std::vector<std::string> clip_ids;
  std::set<std::string> methods = {"grad_cam", "integrated_gradients", "shap"};
};

inline void cmd_explain(const std::filesystem::path& workdir,
                        const std::filesystem::path& checkpoint_stem, const ExplainRequest& req,
                        const XaiConfig& xai_cfg, uint64_t seed) {
  FeatureStore store = load_feature_store(workdir);
  WorkdirLock lock(workdir);
  nn::LoadedCheckpoint ckpt = nn::load_checkpoint(checkpoint_stem);
  auto xdir = workdir / "xai";
  std::filesystem::create_directories(xdir);

  if (ckpt.model.config().mel_bins != dsp::kMelBands ||
      ckpt.model.config().mel_frames != dsp::kStftFrames)
    throw data_error("explain: checkpoint feature geometry does not match the store");

  // Background set for SHAP mean imputation: seeded draw from the train split
  // when available, otherwise over all records.
  std::vector<double> background_mean(dsp::kHandDim, 0.0);
  {
    std::vector<const StoreRecord*> pool;
    auto split_path = workdir / "split.json";
    if (std::filesystem::exists(split_path)) {
      train::SplitAssignment split =
          train::SplitAssignment::from_json(nlohmann::json::parse(read_file_text(split_path)));
      for (const auto& r : store.records)
        if (split.by_clip.count(r.clip_id) &&
            split.of(r.clip_id) == train::Partition::train)
          pool.push_back(&r);
    }
    if (pool.empty())
      for (const auto& r : store.records) pool.push_back(&r);
    Rng rng = Rng(seed).derive("shap_background");
    std::vector<const StoreRecord*> chosen;
    int want = std::min<int>(xai_cfg.shap_background, static_cast<int>(pool.size()));
    for (int k = 0; k < want; ++k)
      chosen.push_back(pool[static_cast<size_t>(rng.below(pool.size()))]);
    for (const auto* r : chosen)
      for (size_t i = 0; i < dsp::kHandDim; ++i)
        background_mean[i] += static_cast<double>(store.hand_of(*r)[i]) / chosen.size();
  }

  nn::Tensor<float> baseline = silent_mel_baseline();

  for (const auto& clip_id : req.clip_ids) {
    const StoreRecord& rec = store.find(clip_id);
    nn::Tensor<float> mel({1, dsp::kMelBands, dsp::kStftFrames});
    std::copy_n(store.mel_of(rec), FeatureStore::kMelLen, mel.v.begin());
    nn::Tensor<float> hand({1, dsp::kHandDim});
    std::copy_n(store.hand_of(rec), FeatureStore::kHandLen, hand.v.begin());

    // Attribution target: the model's predicted class.
    nn::Trace<float> tr = ckpt.model.forward(mel, hand, nn::Mode::eval);
    int target = 0;
    for (int c = 1; c < train::kNumClasses; ++c)
      if (tr.probs.v[static_cast<size_t>(c)] > tr.probs.v[static_cast<size_t>(target)]) target = c;
    double confidence = tr.probs.v[static_cast<size_t>(target)];
    log_info("explain " + clip_id + ": predicted " +
             train::class_names()[static_cast<size_t>(target)] + " (" +
             report::fmt(confidence, 3) + ")");

    xai::AttributionMap cam, ig, hand_shap, pixel;
    if (req.methods.count("grad_cam")) {
      cam = xai::grad_cam(ckpt.model, mel, hand, target);
      write_attribution(xdir, clip_id, cam);
    }
    if (req.methods.count("integrated_gradients")) {
      ig = xai::integrated_gradients(ckpt.model, mel, hand, baseline, target, xai_cfg.ig_steps);
      write_attribution(xdir, clip_id, ig);
    }
    if (req.methods.count("shap")) {
      xai::PredictFn f = xai::hand_logit_predictor(ckpt.model, mel, target);
      std::vector<double> x(dsp::kHandDim);
      for (size_t i = 0; i < x.size(); ++i) x[i] = static_cast<double>(hand.v[i]);
      xai::ShapResult sr = xai::shap_sampled(f, x, background_mean, xai_cfg.shap_permutations,
                                             Rng(seed).derive("shap", Rng::hash_name(clip_id)));
      hand_shap.method = "shap";
      hand_shap.target_class = target;
      hand_shap.shape = {dsp::kHandDim};
      hand_shap.values.assign(sr.phi.begin(), sr.phi.end());
      hand_shap.baseline = "train_background_mean";
      hand_shap.diagnostics["f_x"] = sr.f_x;
      hand_shap.diagnostics["f_null"] = sr.f_null;
      double mean_se = 0.0;
      for (double se : sr.standard_error) mean_se += se / sr.standard_error.size();
      hand_shap.diagnostics["mean_standard_error"] = mean_se;
      hand_shap.diagnostics["permutations"] = xai_cfg.shap_permutations;
      write_attribution(xdir, clip_id, hand_shap);

      // Pixel-level spectrogram attribution, approximated by IG averaged over
      // noise-perturbed silent baselines (flagged as an approximation in the
      // method name; exact coalition SHAP over 31,616 pixels is intractable).
      pixel.method = "shap_pixel_ig_approx";
      pixel.target_class = target;
      pixel.shape = {dsp::kMelBands, dsp::kStftFrames};
      pixel.values.assign(FeatureStore::kMelLen, 0.0f);
      Rng brng = Rng(seed).derive("pixel_baselines", Rng::hash_name(clip_id));
      for (int b = 0; b < xai_cfg.pixel_shap_baselines; ++b) {
        nn::Tensor<float> noisy = baseline;
        for (auto& v : noisy.v) v += static_cast<float>(0.05 * brng.gaussian());
        xai::AttributionMap one = xai::integrated_gradients(
            ckpt.model, mel, hand, noisy, target, xai_cfg.ig_steps, "noise_perturbed_silent_mel");
        for (size_t i = 0; i < pixel.values.size(); ++i)
          pixel.values[i] += one.values[i] / xai_cfg.pixel_shap_baselines;
      }
      pixel.baseline = "8x noise-perturbed silent mels (averaged)";
      pixel.diagnostics["baselines"] = xai_cfg.pixel_shap_baselines;
      write_attribution(xdir, clip_id, pixel);
    }

    // Combined overlay figure: grad-cam, IG, pixel-SHAP panels plus the top
    // handcrafted |phi| bars, stacked into one SVG (nested svg elements).
    std::vector<std::pair<std::string, double>> panels;  // svg text, height
    std::vector<float> mel_vals(mel.v.begin(), mel.v.end());
    if (!cam.values.empty())
      panels.push_back({report::overlay_figure(
                            mel_vals, cam.values, dsp::kMelBands, dsp::kStftFrames,
                            clip_id + " grad-cam (" +
                                train::class_names()[static_cast<size_t>(target)] + ")",
                            false),
                        300});
    if (!ig.values.empty())
      panels.push_back({report::overlay_figure(mel_vals, ig.values, dsp::kMelBands,
                                               dsp::kStftFrames,
                                               clip_id + " integrated gradients", true),
                        300});
    if (!pixel.values.empty())
      panels.push_back(
          {report::overlay_figure(mel_vals, pixel.values, dsp::kMelBands, dsp::kStftFrames,
                                  clip_id + " pixel attribution (IG approx of SHAP)", true),
           300});
    if (!hand_shap.values.empty()) {
      std::vector<std::pair<double, int>> ranked;
      for (size_t i = 0; i < hand_shap.values.size(); ++i)
        ranked.push_back({std::abs(hand_shap.values[i]), static_cast<int>(i)});
      std::stable_sort(ranked.begin(), ranked.end(),
                       [](auto& a, auto& b) { return a.first > b.first; });
      std::vector<report::BarItem> bars;
      for (int k = 0; k < 15 && k < static_cast<int>(ranked.size()); ++k) {
        report::BarItem item;
        item.label = dsp::handcrafted_feature_names()[static_cast<size_t>(
            ranked[static_cast<size_t>(k)].second)];
        item.value = hand_shap.values[static_cast<size_t>(ranked[static_cast<size_t>(k)].second)];
        bars.push_back(item);
      }
      panels.push_back({report::bar_figure(bars, clip_id + " handcrafted SHAP (top 15)"),
                        36.0 + 15 * 16.0 + 16.0});
    }
    if (!panels.empty()) {
      double total_h = 0;
      for (const auto& [svg, h] : panels) total_h += h + 8;
      std::string stacked = "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"480\" height=\"" +
                            report::fmt(total_h, 0) + "\">\n";
      double y = 0;
      for (const auto& [svg, h] : panels) {
        stacked += "<g transform=\"translate(0," + report::fmt(y, 0) + ")\">" + svg + "</g>\n";
        y += h + 8;
      }
      stacked += "</svg>\n";
      write_file_text(xdir / (clip_id + "_overlay.svg"), stacked);
    }
  }
}

// Dataset-level handcrafted-feature importance: mean |phi| over a seeded
// sample of the train split, ranked; writes xai/global_importance.json and a
// top-20 bar figure.
inline nlohmann::json cmd_global_importance(const std::filesystem::path& workdir,
                                            const std::filesystem::path& checkpoint_stem,
                                            int n_samples, const XaiConfig& xai_cfg,
                                            uint64_t seed) {
  FeatureStore store = load_feature_store(workdir);
  WorkdirLock lock(workdir);
  nn::LoadedCheckpoint ckpt = nn::load_checkpoint(checkpoint_stem);
  auto xdir = workdir / "xai";
  std::filesystem::create_directories(xdir);

  std::vector<const StoreRecord*> pool;
  auto split_path = workdir / "split.json";
  if (std::filesystem::exists(split_path)) {
    train::SplitAssignment split =
        train::SplitAssignment::from_json(nlohmann::json::parse(read_file_text(split_path)));
    for (const auto& r : store.records)
      if (split.by_clip.count(r.clip_id) && split.of(r.clip_id) == train::Partition::train)
        pool.push_back(&r);
  }
  if (pool.empty())
    for (const auto& r : store.records) pool.push_back(&r);
  if (static_cast<int>(pool.size()) < n_samples) n_samples = static_cast<int>(pool.size());
  if (n_samples < 10)
    throw data_error("global importance needs at least 10 samples in the pool");

  Rng rng = Rng(seed).derive("global_importance");
  std::vector<const StoreRecord*> chosen = pool;
  rng.shuffle(chosen);
  chosen.resize(static_cast<size_t>(n_samples));

  std::vector<double> background_mean(dsp::kHandDim, 0.0);
  for (const auto* r : pool)
    for (size_t i = 0; i < dsp::kHandDim; ++i)
      background_mean[i] += static_cast<double>(store.hand_of(*r)[i]) / pool.size();

  std::vector<nn::Tensor<float>> mels;
  std::vector<std::vector<double>> hands;
  for (const auto* r : chosen) {
    nn::Tensor<float> mel({1, dsp::kMelBands, dsp::kStftFrames});
    std::copy_n(store.mel_of(*r), FeatureStore::kMelLen, mel.v.begin());
    mels.push_back(std::move(mel));
    std::vector<double> h(dsp::kHandDim);
    for (size_t i = 0; i < h.size(); ++i) h[i] = static_cast<double>(store.hand_of(*r)[i]);
    hands.push_back(std::move(h));
  }

  auto ranking = xai::global_importance(ckpt.model, mels, hands, background_mean,
                                        xai_cfg.shap_permutations, rng.derive("shap"));

  nlohmann::json rows = nlohmann::json::array();
  std::vector<report::BarItem> bars;
  for (const auto& fi : ranking) {
    rows.push_back({{"feature", fi.name}, {"index", fi.index}, {"mean_abs_phi", fi.mean_abs_phi}});
    if (bars.size() < 20) bars.push_back({fi.name, fi.mean_abs_phi});
  }
  nlohmann::json j = {{"n_samples", n_samples},
                      {"permutations", xai_cfg.shap_permutations},
                      {"ranking", rows}};
  write_file_text(xdir / "global_importance.json", j.dump(2) + "\n");
  write_file_text(xdir / "global_importance.svg",
                  report::bar_figure(bars, "handcrafted feature importance (mean |phi|, top 20)"));
  log_info("global importance: top feature " + ranking.front().name);
  return j;
}

// --------------------------------------------------------------------------
// report: a single HTML document regenerated purely from the logged JSON
// (no model re-execution); dangling artifacts are listed, not fatal.
// --------------------------------------------------------------------------
inline std::string learning_curves_svg(const std::filesystem::path& jsonl_path) {
  std::istringstream in(read_file_text(jsonl_path));
  std::vector<double> epoch, tacc, vacc, tloss, vloss;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    nlohmann::json j = nlohmann::json::parse(line);
    epoch.push_back(j.at("epoch").get<double>());
    tacc.push_back(j.at("train_accuracy").get<double>());
    vacc.push_back(j.at("val_accuracy").get<double>());
    tloss.push_back(j.at("train_loss").get<double>());
    vloss.push_back(j.at("val_loss").get<double>());
  }
  if (epoch.empty()) throw data_error("no epochs in " + jsonl_path.string());
  std::string acc = report::line_chart({{"train", "#1f77b4", epoch, tacc},
                                        {"val", "#d62728", epoch, vacc}},
                                       "accuracy", "epoch", "accuracy");
  std::string loss = report::line_chart({{"train", "#1f77b4", epoch, tloss},
                                         {"val", "#d62728", epoch, vloss}},
                                        "loss", "epoch", "loss");
  std::string svg = "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"1056\" height=\"328\">\n";
  svg += "<g>" + acc + "</g>\n<g transform=\"translate(528,0)\">" + loss + "</g>\n</svg>\n";
  return svg;
}

inline std::string cmd_report(const std::filesystem::path& workdir) {
  std::vector<std::string> missing;
  std::string html =
      "<!DOCTYPE html>\n<html><head><meta charset=\"utf-8\"><title>run report</title>\n"
      "<style>body{font-family:sans-serif;max-width:1100px;margin:24px auto;color:#222}"
      "table{border-collapse:collapse}td,th{border:1px solid #ccc;padding:4px 10px;"
      "text-align:right}th{background:#f2f2f2}td:first-child,th:first-child{text-align:left}"
      "h2{border-bottom:1px solid #ddd;padding-bottom:4px}</style></head><body>\n";
  html += "<h1>Run report</h1>\n";

  // learning curves
  auto epochs_path = workdir / "epochs.jsonl";
  if (std::filesystem::exists(epochs_path)) {
    std::string curves = learning_curves_svg(epochs_path);
    write_file_text(workdir / "learning_curves.svg", curves);
    html += "<h2>Learning curves</h2>\n" + curves + "\n";
  } else {
    missing.push_back("epochs.jsonl");
  }

  // training summary
  auto tsum_path = workdir / "train_summary.json";
  if (std::filesystem::exists(tsum_path)) {
    nlohmann::json t = nlohmann::json::parse(read_file_text(tsum_path));
    html += "<h2>Training</h2>\n<table><tr><th>replicate seed</th><th>best epoch</th>"
            "<th>val macro-F1</th><th>val loss</th><th>epochs run</th></tr>\n";
    for (const auto& r : t.at("replicates"))
      html += "<tr><td>" + std::to_string(r.at("seed").get<uint64_t>()) + "</td><td>" +
              std::to_string(r.at("best_epoch").get<int>()) + "</td><td>" +
              report::fmt(r.at("val_macro_f1").get<double>(), 4) + "</td><td>" +
              report::fmt(r.at("val_loss").get<double>(), 4) + "</td><td>" +
              std::to_string(r.at("epochs_run").get<int>()) + "</td></tr>\n";
    html += "</table>\n";
  } else {
    missing.push_back("train_summary.json");
  }

  // metrics tables (per partition when present)
  bool any_metrics = false;
  for (const char* part : {"val", "test"}) {
    auto mpath = workdir / ("metrics_" + std::string(part) + ".json");
    if (!std::filesystem::exists(mpath)) continue;
    any_metrics = true;
    nlohmann::json m = nlohmann::json::parse(read_file_text(mpath));
    html += "<h2>Metrics (" + std::string(part) + ")</h2>\n";
    html += "<table><tr><th>class</th><th>precision</th><th>recall</th><th>F1</th>"
            "<th>support</th><th>AUC</th></tr>\n";
    for (const auto& name : train::class_names()) {
      const auto& pc = m.at("per_class").at(name);
      html += "<tr><td>" + name + "</td><td>" + report::fmt(pc.at("precision").get<double>(), 4) +
              "</td><td>" + report::fmt(pc.at("recall").get<double>(), 4) + "</td><td>" +
              report::fmt(pc.at("f1").get<double>(), 4) + "</td><td>" +
              std::to_string(pc.at("support").get<int64_t>()) + "</td><td>" +
              (pc.contains("auc") ? report::fmt(pc.at("auc").get<double>(), 4) : "-") +
              "</td></tr>\n";
    }
    html += "<tr><td><b>accuracy</b></td><td colspan=5>" +
            report::fmt(m.at("accuracy").get<double>(), 4) + "</td></tr>\n";
    html += "<tr><td><b>macro</b></td><td>" +
            report::fmt(m.at("macro").at("precision").get<double>(), 4) + "</td><td>" +
            report::fmt(m.at("macro").at("recall").get<double>(), 4) + "</td><td>" +
            report::fmt(m.at("macro").at("f1").get<double>(), 4) + "</td><td>" +
            std::to_string(m.at("total").get<int64_t>()) + "</td><td>" +
            (m.at("macro").contains("auc") ? report::fmt(m.at("macro").at("auc").get<double>(), 4)
                                           : "-") +
            "</td></tr>\n</table>\n";
    for (const char* fig : {"confusion_", "roc_"}) {
      auto fpath = workdir / (fig + std::string(part) + ".svg");
      if (std::filesystem::exists(fpath)) html += read_file_text(fpath);
    }
  }
  if (!any_metrics) missing.push_back("metrics_val.json / metrics_test.json");

  // ablation table
  auto apath = workdir / "ablation.json";
  if (std::filesystem::exists(apath)) {
    nlohmann::json a = nlohmann::json::parse(read_file_text(apath));
    html += "<h2>Ablation</h2>\n<table><tr><th>variant</th><th>ablated component(s)</th>"
            "<th>test accuracy</th><th>macro F1</th><th>macro ROC-AUC</th></tr>\n";
    for (const auto& row : a.at("rows"))
      html += "<tr><td>" + row.at("variant").get<std::string>() + "</td><td>" +
              row.at("ablated").get<std::string>() + "</td><td>" +
              report::fmt(row.at("test_accuracy").get<double>(), 4) + "</td><td>" +
              report::fmt(row.at("macro_f1").get<double>(), 4) + "</td><td>" +
              report::fmt(row.at("macro_roc_auc").get<double>(), 4) + "</td></tr>\n";
    html += "</table>\n";
  }

  // xai gallery
  auto xdir = workdir / "xai";
  if (std::filesystem::exists(xdir)) {
    std::vector<std::string> overlays;
    for (const auto& e : std::filesystem::directory_iterator(xdir)) {
      std::string name = e.path().filename().string();
      if (name.size() > 12 && name.substr(name.size() - 12) == "_overlay.svg")
        overlays.push_back(name);
    }
    std::sort(overlays.begin(), overlays.end());
    if (!overlays.empty()) {
      html += "<h2>Attribution gallery</h2>\n";
      for (const auto& name : overlays) html += read_file_text(xdir / name);
    }
  }

  if (!missing.empty()) {
    html += "<h2>Missing artifacts</h2>\n<ul>\n";
    for (const auto& m : missing) html += "<li>" + m + "</li>\n";
    html += "</ul>\n";
  }
  html += "</body></html>\n";
  write_file_text(workdir / "report.html", html);
  return html;
}

}  // namespace respira::pipeline
