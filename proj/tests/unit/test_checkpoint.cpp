#include <doctest.h>

#include <cstring>
#include <filesystem>

#include "respira/core/rng.hpp"
#include "respira/nn/checkpoint.hpp"

using namespace respira;
using namespace respira::nn;

namespace {

ModelConfig cfg_for_test(Variant v = Variant::FullHybrid) {
  ModelConfig cfg;
  cfg.conv_blocks = {{3, 3, 2}, {4, 3, 2}};
  cfg.lstm_units = 5;
  cfg.attention_dim = 4;
  cfg.hand_hidden = {6, 6};
  cfg.fusion_hidden = 7;
  cfg.variant = v;
  cfg.mel_bins = 12;
  cfg.mel_frames = 20;
  cfg.hand_dim = 9;
  return cfg;
}

}  // namespace

TEST_CASE("checkpoint: bit-exact round-trip of every tensor") {
  auto dir = std::filesystem::temp_directory_path() / "respira_ckpt_test";
  std::filesystem::create_directories(dir);

  Model<float> model(cfg_for_test());
  model.init_params(Rng(55));
  CheckpointMeta meta;
  meta.epoch = 17;
  meta.val_macro_f1 = 0.875;
  meta.val_loss = 0.31;
  meta.seed = 99;
  meta.class_names = {"Asthma", "Bronchial", "COPD", "Healthy", "Pneumonia"};
  save_checkpoint(model, meta, dir / "ckpt");

  LoadedCheckpoint back = load_checkpoint(dir / "ckpt");
  CHECK(back.meta.epoch == 17);
  CHECK(back.meta.val_macro_f1 == 0.875);
  CHECK(back.meta.seed == 99);
  CHECK(back.model.config().variant == Variant::FullHybrid);

  REQUIRE(back.model.params().entries.size() == model.params().entries.size());
  for (size_t i = 0; i < model.params().entries.size(); ++i) {
    const auto& a = model.params().entries[i];
    const auto& b = back.model.params().entries[i];
    CHECK(a.name == b.name);
    CHECK(a.trainable == b.trainable);
    CHECK(a.decay == b.decay);
    REQUIRE(a.value.v.size() == b.value.v.size());
    CHECK(std::memcmp(a.value.v.data(), b.value.v.data(), a.value.v.size() * 4) == 0);
  }

  // Saving again (same stem so the manifest's blob reference matches)
  // produces byte-identical files.
  std::filesystem::create_directories(dir / "again");
  save_checkpoint(back.model, back.meta, dir / "again" / "ckpt");
  CHECK(read_file_bytes(dir / "ckpt.bin") == read_file_bytes(dir / "again" / "ckpt.bin"));
  CHECK(read_file_text(dir / "ckpt.json") == read_file_text(dir / "again" / "ckpt.json"));
  std::filesystem::remove_all(dir);
}

TEST_CASE("checkpoint: variant configs round-trip and mismatches are rejected") {
  auto dir = std::filesystem::temp_directory_path() / "respira_ckpt_test2";
  std::filesystem::create_directories(dir);

  Model<float> model(cfg_for_test(Variant::CnnOnly));
  model.init_params(Rng(56));
  CheckpointMeta meta;
  meta.class_names = {"a", "b", "c", "d", "e"};
  save_checkpoint(model, meta, dir / "cnn");
  LoadedCheckpoint back = load_checkpoint(dir / "cnn");
  CHECK(back.model.config().variant == Variant::CnnOnly);
  CHECK_FALSE(back.model.params().has("lstm.fw.wx"));

  // Corrupt the blob size.
  auto blob = read_file_bytes(dir / "cnn.bin");
  blob.pop_back();
  write_file_bytes(dir / "cnn.bin", blob);
  CHECK_THROWS_AS(load_checkpoint(dir / "cnn"), respira::Error);

  CHECK_THROWS_AS(load_checkpoint(dir / "missing"), respira::Error);
  std::filesystem::remove_all(dir);
}
