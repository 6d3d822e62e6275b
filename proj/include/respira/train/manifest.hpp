#pragma once
#include <array>
#include <filesystem>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "respira/core/binio.hpp"
#include "respira/core/error.hpp"

namespace respira::train {

// Canonical class set, index order alphabetical.
inline const std::vector<std::string>& class_names() {
  static const std::vector<std::string> names = {"Asthma", "Bronchial", "COPD", "Healthy",
                                                 "Pneumonia"};
  return names;
}
constexpr int kNumClasses = 5;

inline int class_index(const std::string& label) {
  const auto& names = class_names();
  for (size_t i = 0; i < names.size(); ++i)
    if (names[i] == label) return static_cast<int>(i);
  throw data_error("unknown class label: '" + label + "'");
}

struct ManifestEntry {
  std::string clip_id;
  std::string path;       // as given in the manifest
  int label = -1;         // class index
  std::string patient_id; // empty when absent
};

struct DatasetManifest {
  std::vector<ManifestEntry> entries;
  std::filesystem::path base_dir;  // manifest location; relative paths resolve against it

  bool has_patient_ids() const {
    for (const auto& e : entries)
      if (!e.patient_id.empty()) return true;
    return false;
  }

  std::array<int, kNumClasses> class_counts() const {
    std::array<int, kNumClasses> counts{};
    for (const auto& e : entries) counts[static_cast<size_t>(e.label)]++;
    return counts;
  }

  std::filesystem::path resolve(const ManifestEntry& e) const {
    std::filesystem::path p(e.path);
    return p.is_absolute() ? p : base_dir / p;
  }
};

namespace detail {

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string cur;
  for (char ch : line) {
    if (ch == ',') {
      fields.push_back(cur);
      cur.clear();
    } else if (ch != '\r') {
      cur += ch;
    }
  }
  fields.push_back(cur);
  return fields;
}

}  // namespace detail

// CSV with header clip_id,path,label[,patient_id].
inline DatasetManifest load_manifest(const std::filesystem::path& csv_path) {
  std::istringstream in(read_file_text(csv_path));
  DatasetManifest manifest;
  manifest.base_dir = csv_path.parent_path();

  std::string line;
  if (!std::getline(in, line)) throw data_error("manifest is empty: " + csv_path.string());
  auto header = detail::split_csv_line(line);
  bool has_patient = false;
  if (header.size() == 4 && header[3] == "patient_id")
    has_patient = true;
  else if (header.size() != 3)
    throw data_error("manifest header must be clip_id,path,label[,patient_id]");
  if (header[0] != "clip_id" || header[1] != "path" || header[2] != "label")
    throw data_error("manifest header must be clip_id,path,label[,patient_id]");

  std::map<std::string, int> seen_ids;
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line == "\r") continue;
    auto fields = detail::split_csv_line(line);
    if (fields.size() != header.size())
      throw data_error("manifest line " + std::to_string(line_no) + ": expected " +
                       std::to_string(header.size()) + " fields");
    ManifestEntry e;
    e.clip_id = fields[0];
    e.path = fields[1];
    e.label = class_index(fields[2]);
    if (has_patient) e.patient_id = fields[3];
    if (e.clip_id.empty())
      throw data_error("manifest line " + std::to_string(line_no) + ": empty clip_id");
    if (seen_ids.count(e.clip_id))
      throw data_error("manifest: duplicate clip_id '" + e.clip_id + "'");
    seen_ids[e.clip_id] = line_no;
    manifest.entries.push_back(std::move(e));
  }
  if (manifest.entries.empty()) throw data_error("manifest has no entries: " + csv_path.string());
  return manifest;
}

}  // namespace respira::train
