#pragma once
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "respira/core/error.hpp"

namespace respira {

// Little-endian scalar access into byte buffers. The build targets LE hosts;
// memcpy keeps it alignment-safe.
inline uint16_t read_u16le(const uint8_t* p) {
  uint16_t v;
  std::memcpy(&v, p, 2);
  return v;
}
inline uint32_t read_u32le(const uint8_t* p) {
  uint32_t v;
  std::memcpy(&v, p, 4);
  return v;
}
inline int16_t read_i16le(const uint8_t* p) {
  int16_t v;
  std::memcpy(&v, p, 2);
  return v;
}
inline int32_t read_i32le(const uint8_t* p) {
  int32_t v;
  std::memcpy(&v, p, 4);
  return v;
}
inline float read_f32le(const uint8_t* p) {
  float v;
  std::memcpy(&v, p, 4);
  return v;
}

inline void append_u16le(std::vector<uint8_t>& out, uint16_t v) {
  uint8_t b[2];
  std::memcpy(b, &v, 2);
  out.insert(out.end(), b, b + 2);
}
inline void append_u32le(std::vector<uint8_t>& out, uint32_t v) {
  uint8_t b[4];
  std::memcpy(b, &v, 4);
  out.insert(out.end(), b, b + 4);
}
inline void append_f32le(std::vector<uint8_t>& out, float v) {
  uint8_t b[4];
  std::memcpy(b, &v, 4);
  out.insert(out.end(), b, b + 4);
}

inline std::vector<uint8_t> read_file_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw data_error("cannot open file: " + path.string());
  in.seekg(0, std::ios::end);
  std::streamoff len = in.tellg();
  in.seekg(0, std::ios::beg);
  std::vector<uint8_t> bytes(static_cast<size_t>(len));
  if (len > 0) in.read(reinterpret_cast<char*>(bytes.data()), len);
  if (!in) throw data_error("short read: " + path.string());
  return bytes;
}

inline void write_file_bytes(const std::filesystem::path& path, const void* data, size_t n) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw data_error("cannot create file: " + path.string());
  out.write(reinterpret_cast<const char*>(data), static_cast<std::streamsize>(n));
  if (!out) throw data_error("short write: " + path.string());
}

inline void write_file_bytes(const std::filesystem::path& path, const std::vector<uint8_t>& b) {
  write_file_bytes(path, b.data(), b.size());
}

inline void write_file_text(const std::filesystem::path& path, const std::string& text) {
  write_file_bytes(path, text.data(), text.size());
}

inline std::string read_file_text(const std::filesystem::path& path) {
  auto b = read_file_bytes(path);
  return std::string(b.begin(), b.end());
}

inline std::vector<float> read_f32_vector(const std::filesystem::path& path) {
  auto bytes = read_file_bytes(path);
  if (bytes.size() % 4 != 0) throw data_error("f32 file size not a multiple of 4: " + path.string());
  std::vector<float> v(bytes.size() / 4);
  std::memcpy(v.data(), bytes.data(), bytes.size());
  return v;
}

inline void write_f32_vector(const std::filesystem::path& path, const std::vector<float>& v) {
  write_file_bytes(path, v.data(), v.size() * 4);
}

}  // namespace respira
