#pragma once
#include <cstring>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "respira/audio/quality.hpp"
#include "respira/core/binio.hpp"
#include "respira/core/error.hpp"
#include "respira/dsp/handcrafted.hpp"
#include "respira/dsp/mel.hpp"
#include "respira/train/manifest.hpp"

namespace respira::pipeline {

// On-disk feature store layout under <workdir>:
//   features/store.json    manifest of records (this file)
//   features/features.bin  concatenated mel (128x247 f32) + hand (70 f32)
//   clips/<id>.f32         standardized z-scored waveform
//   clips/<id>.json        one-line sidecar {source, stage, qc_verdict}
struct StoreRecord {
  std::string clip_id;
  int label = -1;
  std::string patient_id;
  std::string source;     // manifest path string
  std::string wave_file;  // workdir-relative
  uint64_t mel_offset = 0;
  uint64_t hand_offset = 0;
  audio::QcReport qc;
};

struct FeatureStore {
  std::filesystem::path workdir;
  std::vector<StoreRecord> records;
  std::vector<float> blob;  // backing storage for mel/hand

  static constexpr size_t kMelLen = static_cast<size_t>(dsp::kMelBands) * dsp::kStftFrames;
  static constexpr size_t kHandLen = dsp::kHandDim;

  const float* mel_of(const StoreRecord& r) const { return blob.data() + r.mel_offset / 4; }
  const float* hand_of(const StoreRecord& r) const { return blob.data() + r.hand_offset / 4; }

  const StoreRecord& find(const std::string& clip_id) const {
    for (const auto& r : records)
      if (r.clip_id == clip_id) return r;
    throw data_error("feature store: no record for clip '" + clip_id + "'");
  }

  std::vector<float> wave_of(const StoreRecord& r) const {
    auto wave = read_f32_vector(workdir / r.wave_file);
    if (wave.size() != static_cast<size_t>(audio::kClipSamples))
      throw data_error("feature store: waveform of unexpected length for " + r.clip_id);
    return wave;
  }
};

inline void save_feature_store(const FeatureStore& store) {
  auto dir = store.workdir / "features";
  std::filesystem::create_directories(dir);
  write_file_bytes(dir / "features.bin", store.blob.data(), store.blob.size() * 4);

  nlohmann::json records = nlohmann::json::array();
  for (const auto& r : store.records) {
    records.push_back({{"clip_id", r.clip_id},
                       {"label", train::class_names()[static_cast<size_t>(r.label)]},
                       {"patient_id", r.patient_id},
                       {"source", r.source},
                       {"wave_file", r.wave_file},
                       {"mel_offset", r.mel_offset},
                       {"hand_offset", r.hand_offset},
                       {"qc",
                        {{"clipping_fraction", r.qc.clipping_fraction},
                         {"snr_estimate_db", r.qc.snr_estimate_db},
                         {"verdict", r.qc.accept ? "accept" : "reject"},
                         {"reason", r.qc.reason}}}});
  }
  nlohmann::json j = {{"format", "respira-feature-store"},
                      {"version", 1},
                      {"mel_bins", dsp::kMelBands},
                      {"mel_frames", dsp::kStftFrames},
                      {"hand_dim", dsp::kHandDim},
                      {"blob", "features.bin"},
                      {"records", records}};
  write_file_text(dir / "store.json", j.dump(2) + "\n");
}

inline FeatureStore load_feature_store(const std::filesystem::path& workdir) {
  auto store_path = workdir / "features" / "store.json";
  if (!std::filesystem::exists(store_path))
    throw data_error("no feature store at " + store_path.string() +
                     " (run the preprocess command first)");
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(read_file_text(store_path));
  } catch (const nlohmann::json::exception& e) {
    throw data_error("feature store manifest is not valid JSON: " + std::string(e.what()));
  }
  if (j.value("format", "") != "respira-feature-store")
    throw data_error("not a feature store manifest: " + store_path.string());
  if (j.at("mel_bins").get<int>() != dsp::kMelBands ||
      j.at("mel_frames").get<int>() != dsp::kStftFrames ||
      j.at("hand_dim").get<int>() != dsp::kHandDim)
    throw data_error("feature store geometry does not match this build");

  FeatureStore store;
  store.workdir = workdir;
  auto bytes = read_file_bytes(workdir / "features" / j.at("blob").get<std::string>());
  if (bytes.size() % 4 != 0) throw data_error("feature blob has a partial float");
  store.blob.resize(bytes.size() / 4);
  std::memcpy(store.blob.data(), bytes.data(), bytes.size());

  for (const auto& rj : j.at("records")) {
    StoreRecord r;
    r.clip_id = rj.at("clip_id").get<std::string>();
    r.label = train::class_index(rj.at("label").get<std::string>());
    r.patient_id = rj.at("patient_id").get<std::string>();
    r.source = rj.at("source").get<std::string>();
    r.wave_file = rj.at("wave_file").get<std::string>();
    r.mel_offset = rj.at("mel_offset").get<uint64_t>();
    r.hand_offset = rj.at("hand_offset").get<uint64_t>();
    const auto& q = rj.at("qc");
    r.qc.clipping_fraction = q.at("clipping_fraction").get<double>();
    r.qc.snr_estimate_db = q.at("snr_estimate_db").get<double>();
    r.qc.accept = q.at("verdict").get<std::string>() == "accept";
    r.qc.reason = q.at("reason").get<std::string>();
    if ((r.mel_offset + FeatureStore::kMelLen * 4 > store.blob.size() * 4) ||
        (r.hand_offset + FeatureStore::kHandLen * 4 > store.blob.size() * 4))
      throw data_error("feature store record overruns blob: " + r.clip_id);
    store.records.push_back(std::move(r));
  }
  return store;
}

}  // namespace respira::pipeline
