#pragma once
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "respira/core/binio.hpp"
#include "respira/core/error.hpp"
#include "respira/nn/model.hpp"

namespace respira::nn {

// Checkpoint = JSON manifest (config, tensor table, training metadata) plus a
// contiguous little-endian float-32 blob. Round-trips bit-exactly.
struct CheckpointMeta {
  int epoch = 0;
  double val_macro_f1 = 0.0;
  double val_loss = 0.0;
  uint64_t seed = 0;
  std::vector<std::string> class_names;
};

inline nlohmann::json model_config_to_json(const ModelConfig& c) {
  nlohmann::json blocks = nlohmann::json::array();
  for (const auto& b : c.conv_blocks)
    blocks.push_back({{"filters", b.filters}, {"kernel", b.kernel}, {"pool", b.pool}});
  return {
      {"variant", variant_name(c.variant)},
      {"conv_blocks", blocks},
      {"conv_dropout", c.conv_dropout},
      {"lstm_units", c.lstm_units},
      {"attention_dim", c.attention_dim},
      {"hand_hidden", c.hand_hidden},
      {"hand_dropout", c.hand_dropout},
      {"fusion_hidden", c.fusion_hidden},
      {"fusion_dropout", c.fusion_dropout},
      {"n_classes", c.n_classes},
      {"mel_bins", c.mel_bins},
      {"mel_frames", c.mel_frames},
      {"hand_dim", c.hand_dim},
  };
}

inline ModelConfig model_config_from_json(const nlohmann::json& j) {
  ModelConfig c;
  c.variant = variant_from_name(j.at("variant").get<std::string>());
  c.conv_blocks.clear();
  for (const auto& b : j.at("conv_blocks"))
    c.conv_blocks.push_back(
        {b.at("filters").get<int>(), b.at("kernel").get<int>(), b.at("pool").get<int>()});
  c.conv_dropout = j.at("conv_dropout").get<double>();
  c.lstm_units = j.at("lstm_units").get<int>();
  c.attention_dim = j.at("attention_dim").get<int>();
  c.hand_hidden = j.at("hand_hidden").get<std::vector<int>>();
  c.hand_dropout = j.at("hand_dropout").get<double>();
  c.fusion_hidden = j.at("fusion_hidden").get<int>();
  c.fusion_dropout = j.at("fusion_dropout").get<double>();
  c.n_classes = j.at("n_classes").get<int>();
  c.mel_bins = j.at("mel_bins").get<int>();
  c.mel_frames = j.at("mel_frames").get<int>();
  c.hand_dim = j.at("hand_dim").get<int>();
  return c;
}

// Writes <path>.json + <path>.bin.
inline void save_checkpoint(const Model<float>& model, const CheckpointMeta& meta,
                            const std::filesystem::path& path_stem) {
  const auto& params = model.params();
  std::vector<uint8_t> blob;
  nlohmann::json tensors = nlohmann::json::array();
  uint64_t offset = 0;
  for (const auto& e : params.entries) {
    nlohmann::json t = {{"name", e.name},
                        {"shape", e.value.shape},
                        {"offset", offset},
                        {"trainable", e.trainable},
                        {"decay", e.decay}};
    tensors.push_back(t);
    size_t bytes = e.value.v.size() * 4;
    blob.resize(blob.size() + bytes);
    std::memcpy(blob.data() + offset, e.value.v.data(), bytes);
    offset += bytes;
  }

  nlohmann::json j = {
      {"format", "respira-checkpoint"},
      {"version", 1},
      {"dtype", "float32"},
      {"config", model_config_to_json(model.config())},
      {"tensors", tensors},
      {"metadata",
       {{"epoch", meta.epoch},
        {"val_macro_f1", meta.val_macro_f1},
        {"val_loss", meta.val_loss},
        {"seed", meta.seed},
        {"class_names", meta.class_names}}},
      {"blob", path_stem.filename().string() + ".bin"},
      {"blob_bytes", offset},
  };
  write_file_text(path_stem.string() + ".json", j.dump(2) + "\n");
  write_file_bytes(path_stem.string() + ".bin", blob);
}

struct LoadedCheckpoint {
  Model<float> model;
  CheckpointMeta meta;
};

inline LoadedCheckpoint load_checkpoint(const std::filesystem::path& path_stem) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(read_file_text(path_stem.string() + ".json"));
  } catch (const nlohmann::json::exception& e) {
    throw data_error("checkpoint manifest is not valid JSON: " + std::string(e.what()));
  }
  if (j.value("format", "") != "respira-checkpoint")
    throw data_error("not a checkpoint manifest: " + path_stem.string() + ".json");
  if (j.value("dtype", "") != "float32") throw data_error("checkpoint dtype must be float32");

  LoadedCheckpoint out{Model<float>(model_config_from_json(j.at("config"))), {}};
  auto blob = read_file_bytes(path_stem.parent_path() / j.at("blob").get<std::string>());
  if (blob.size() != j.at("blob_bytes").get<uint64_t>())
    throw data_error("checkpoint blob size mismatch");

  auto& params = out.model.params();
  size_t seen = 0;
  for (const auto& t : j.at("tensors")) {
    const std::string name = t.at("name").get<std::string>();
    if (!params.has(name)) throw data_error("checkpoint tensor not in model: " + name);
    auto& dst = params.at(name);
    auto shape = t.at("shape").get<std::vector<int>>();
    if (shape != dst.shape)
      throw data_error("checkpoint tensor shape mismatch for " + name + ": file " +
                       shape_string(shape) + " vs model " + shape_string(dst.shape));
    uint64_t off = t.at("offset").get<uint64_t>();
    size_t bytes = dst.v.size() * 4;
    if (off + bytes > blob.size()) throw data_error("checkpoint tensor overruns blob: " + name);
    std::memcpy(dst.v.data(), blob.data() + off, bytes);
    ++seen;
  }
  if (seen != params.entries.size())
    throw data_error("checkpoint is missing tensors for this config");

  const auto& m = j.at("metadata");
  out.meta.epoch = m.at("epoch").get<int>();
  out.meta.val_macro_f1 = m.at("val_macro_f1").get<double>();
  out.meta.val_loss = m.at("val_loss").get<double>();
  out.meta.seed = m.at("seed").get<uint64_t>();
  out.meta.class_names = m.at("class_names").get<std::vector<std::string>>();
  return out;
}

}  // namespace respira::nn
