#pragma once
#include <algorithm>
#include <array>
#include <cmath>
#include <map>
#include <string>
#include <unordered_map>
#include <vector>

#include <json.hpp>

#include "respira/core/error.hpp"
#include "respira/core/rng.hpp"
#include "respira/train/manifest.hpp"

namespace respira::train {

enum class Partition { train, val, test };

inline const char* partition_name(Partition p) {
  switch (p) {
    case Partition::train: return "train";
    case Partition::val: return "val";
    case Partition::test: return "test";
  }
  return "?";
}

inline Partition partition_from_name(const std::string& s) {
  for (Partition p : {Partition::train, Partition::val, Partition::test})
    if (s == partition_name(p)) return p;
  throw data_error("unknown partition: " + s);
}

struct SplitAssignment {
  std::map<std::string, Partition> by_clip;  // ordered => deterministic serialization
  uint64_t seed = 0;
  bool patient_level = false;

  Partition of(const std::string& clip_id) const {
    auto it = by_clip.find(clip_id);
    if (it == by_clip.end()) throw data_error("clip not in split: " + clip_id);
    return it->second;
  }

  nlohmann::json to_json() const {
    nlohmann::json assignment = nlohmann::json::object();
    for (const auto& [id, p] : by_clip) assignment[id] = partition_name(p);
    return {{"seed", seed}, {"patient_level", patient_level}, {"assignment", assignment}};
  }

  static SplitAssignment from_json(const nlohmann::json& j) {
    SplitAssignment s;
    s.seed = j.at("seed").get<uint64_t>();
    s.patient_level = j.at("patient_level").get<bool>();
    for (auto it = j.at("assignment").begin(); it != j.at("assignment").end(); ++it)
      s.by_clip[it.key()] = partition_from_name(it.value().get<std::string>());
    return s;
  }
};

namespace detail {

struct ClassTargets {
  int n_test = 0, n_val = 0, n_train = 0;
};

inline ClassTargets targets_for(int n, double val_ratio, double test_ratio) {
  ClassTargets t;
  t.n_test = std::max(1, static_cast<int>(std::lround(n * test_ratio)));
  t.n_val = std::max(1, static_cast<int>(std::lround(n * val_ratio)));
  t.n_train = n - t.n_test - t.n_val;
  return t;
}

}  // namespace detail

// Stratified 70/15/15 split, deterministic for a fixed seed. When patient ids
// are present the split is patient-level: patients are greedily packed
// per class toward the target counts and never span partitions (per-class
// proportions then hold only as closely as patient granularity allows).
inline SplitAssignment split_dataset(const DatasetManifest& manifest, uint64_t seed,
                                     double train_ratio = 0.70, double val_ratio = 0.15,
                                     double test_ratio = 0.15) {
  if (manifest.entries.empty()) throw data_error("split: empty manifest");
  if (std::abs(train_ratio + val_ratio + test_ratio - 1.0) > 1e-9)
    throw data_error("split: ratios must sum to 1");

  SplitAssignment out;
  out.seed = seed;
  out.patient_level = manifest.has_patient_ids();
  Rng root(seed);

  // Per-class clip indices.
  std::array<std::vector<int>, kNumClasses> per_class;
  for (size_t i = 0; i < manifest.entries.size(); ++i)
    per_class[static_cast<size_t>(manifest.entries[i].label)].push_back(static_cast<int>(i));

  if (!out.patient_level) {
    for (int c = 0; c < kNumClasses; ++c) {
      auto& idx = per_class[static_cast<size_t>(c)];
      if (idx.empty()) continue;
      if (static_cast<int>(idx.size()) < 3)
        throw data_error(std::string("split: class '") + class_names()[static_cast<size_t>(c)] +
                         "' has fewer than 3 clips; cannot fill three partitions");
      Rng rng = root.derive("class", static_cast<uint64_t>(c));
      rng.shuffle(idx);
      auto t = detail::targets_for(static_cast<int>(idx.size()), val_ratio, test_ratio);
      for (size_t k = 0; k < idx.size(); ++k) {
        Partition p = k < static_cast<size_t>(t.n_test)             ? Partition::test
                      : k < static_cast<size_t>(t.n_test + t.n_val) ? Partition::val
                                                                    : Partition::train;
        out.by_clip[manifest.entries[static_cast<size_t>(idx[k])].clip_id] = p;
      }
    }
    return out;
  }

  // Patient-level: group clips by patient (clips without an id form
  // singleton groups), then per class greedily assign unassigned patients to
  // the partition with the largest remaining per-class deficit.
  std::map<std::string, std::vector<int>> patient_clips;
  for (size_t i = 0; i < manifest.entries.size(); ++i) {
    const auto& e = manifest.entries[i];
    std::string key = e.patient_id.empty() ? "\x01clip:" + e.clip_id : e.patient_id;
    patient_clips[key].push_back(static_cast<int>(i));
  }
  std::map<std::string, Partition> patient_assignment;

  for (int c = 0; c < kNumClasses; ++c) {
    auto& idx = per_class[static_cast<size_t>(c)];
    if (idx.empty()) continue;
    auto t = detail::targets_for(static_cast<int>(idx.size()), val_ratio, test_ratio);
    std::array<int, 3> deficit = {t.n_train, t.n_val, t.n_test};  // by Partition order

    // Patients of this class, in first-appearance order.
    std::vector<std::string> patients;
    std::map<std::string, int> class_clip_count;
    for (int i : idx) {
      const auto& e = manifest.entries[static_cast<size_t>(i)];
      std::string key = e.patient_id.empty() ? "\x01clip:" + e.clip_id : e.patient_id;
      if (!class_clip_count.count(key)) patients.push_back(key);
      class_clip_count[key]++;
    }
    if (patients.size() < 3)
      throw data_error(std::string("split: class '") + class_names()[static_cast<size_t>(c)] +
                       "' has fewer than 3 patients; cannot fill three partitions");

    // Patients already assigned via an earlier class consume their deficit.
    std::vector<std::string> todo;
    for (const auto& p : patients) {
      auto it = patient_assignment.find(p);
      if (it != patient_assignment.end())
        deficit[static_cast<size_t>(it->second)] -= class_clip_count[p];
      else
        todo.push_back(p);
    }
    Rng rng = root.derive("patients", static_cast<uint64_t>(c));
    rng.shuffle(todo);
    for (const auto& p : todo) {
      int best = 0;
      for (int k = 1; k < 3; ++k)
        if (deficit[static_cast<size_t>(k)] > deficit[static_cast<size_t>(best)]) best = k;
      patient_assignment[p] = static_cast<Partition>(best);
      deficit[static_cast<size_t>(best)] -= class_clip_count[p];
    }
  }

  for (const auto& [patient, clips] : patient_clips) {
    auto it = patient_assignment.find(patient);
    if (it == patient_assignment.end()) continue;  // class was empty
    for (int i : clips) out.by_clip[manifest.entries[static_cast<size_t>(i)].clip_id] = it->second;
  }
  return out;
}

}  // namespace respira::train
