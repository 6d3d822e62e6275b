#pragma once
#include <cstdint>
#include <string>
#include <vector>

#include "respira/core/binio.hpp"
#include "respira/core/error.hpp"

namespace respira::audio {

// Decoded multichannel audio. Samples are real amplitudes; integer PCM is
// scaled into [-1, 1) at decode time.
struct RawRecording {
  std::vector<std::vector<double>> channels;  // equal length per channel
  int sample_rate = 0;

  int channel_count() const { return static_cast<int>(channels.size()); }
  size_t frames() const { return channels.empty() ? 0 : channels[0].size(); }
};

namespace detail {

struct FmtChunk {
  uint16_t format = 0;
  uint16_t channels = 0;
  uint32_t sample_rate = 0;
  uint16_t block_align = 0;
  uint16_t bits = 0;
  bool seen = false;
};

constexpr uint16_t kFormatPcm = 1;
constexpr uint16_t kFormatFloat = 3;
constexpr uint16_t kFormatExtensible = 0xfffe;

}  // namespace detail

// Parses a RIFF/WAVE container holding PCM-16, PCM-24, PCM-32 or IEEE
// float-32 samples. Errors name the chunk that failed to parse.
inline RawRecording decode_wav(const std::vector<uint8_t>& bytes) {
  using respira::data_error;
  if (bytes.size() < 12) throw data_error("wav decode: truncated RIFF header");
  if (std::memcmp(bytes.data(), "RIFF", 4) != 0)
    throw data_error("wav decode: malformed 'RIFF' chunk id");
  if (std::memcmp(bytes.data() + 8, "WAVE", 4) != 0)
    throw data_error("wav decode: malformed 'WAVE' form type");

  detail::FmtChunk fmt;
  const uint8_t* data_ptr = nullptr;
  size_t data_len = 0;

  size_t pos = 12;
  while (pos + 8 <= bytes.size()) {
    char id[5] = {0};
    std::memcpy(id, bytes.data() + pos, 4);
    uint32_t len = read_u32le(bytes.data() + pos + 4);
    size_t body = pos + 8;
    if (body + len > bytes.size())
      throw data_error(std::string("wav decode: chunk '") + id + "' overruns file");
    if (std::memcmp(id, "fmt ", 4) == 0) {
      if (len < 16) throw data_error("wav decode: malformed 'fmt ' chunk (too short)");
      fmt.format = read_u16le(bytes.data() + body);
      fmt.channels = read_u16le(bytes.data() + body + 2);
      fmt.sample_rate = read_u32le(bytes.data() + body + 4);
      fmt.block_align = read_u16le(bytes.data() + body + 12);
      fmt.bits = read_u16le(bytes.data() + body + 14);
      if (fmt.format == detail::kFormatExtensible) {
        if (len < 40) throw data_error("wav decode: malformed extensible 'fmt ' chunk");
        // SubFormat GUID starts at offset 24; first two bytes carry the code.
        fmt.format = read_u16le(bytes.data() + body + 24);
      }
      fmt.seen = true;
    } else if (std::memcmp(id, "data", 4) == 0) {
      data_ptr = bytes.data() + body;
      data_len = len;
    }
    pos = body + len + (len & 1);  // chunks are word-aligned
  }

  if (!fmt.seen) throw data_error("wav decode: missing 'fmt ' chunk");
  if (data_ptr == nullptr) throw data_error("wav decode: missing 'data' chunk");
  if (fmt.channels == 0) throw data_error("wav decode: malformed 'fmt ' chunk (zero channels)");
  if (fmt.sample_rate == 0) throw data_error("wav decode: malformed 'fmt ' chunk (zero sample rate)");

  int bytes_per_sample = fmt.bits / 8;
  if (fmt.format == detail::kFormatPcm) {
    if (fmt.bits != 16 && fmt.bits != 24 && fmt.bits != 32)
      throw data_error("wav decode: unsupported format: PCM-" + std::to_string(fmt.bits));
  } else if (fmt.format == detail::kFormatFloat) {
    if (fmt.bits != 32)
      throw data_error("wav decode: unsupported format: IEEE float-" + std::to_string(fmt.bits));
  } else {
    throw data_error("wav decode: unsupported format: code " + std::to_string(fmt.format));
  }

  size_t frame_bytes = static_cast<size_t>(bytes_per_sample) * fmt.channels;
  if (fmt.block_align != 0 && fmt.block_align != frame_bytes)
    throw data_error("wav decode: malformed 'fmt ' chunk (block align mismatch)");
  if (frame_bytes == 0 || data_len % frame_bytes != 0)
    throw data_error("wav decode: malformed 'data' chunk (size leaves channels with unequal lengths)");

  size_t frames = data_len / frame_bytes;
  RawRecording rec;
  rec.sample_rate = static_cast<int>(fmt.sample_rate);
  rec.channels.assign(fmt.channels, std::vector<double>(frames));

  const uint8_t* p = data_ptr;
  for (size_t i = 0; i < frames; ++i) {
    for (int c = 0; c < fmt.channels; ++c) {
      double v = 0.0;
      if (fmt.format == detail::kFormatFloat) {
        v = read_f32le(p);
      } else if (fmt.bits == 16) {
        v = read_i16le(p) / 32768.0;
      } else if (fmt.bits == 24) {
        int32_t s = (static_cast<int32_t>(p[0]) << 8) | (static_cast<int32_t>(p[1]) << 16) |
                    (static_cast<int32_t>(p[2]) << 24);
        v = (s >> 8) / 8388608.0;
      } else {  // PCM-32
        v = read_i32le(p) / 2147483648.0;
      }
      rec.channels[c][i] = v;
      p += bytes_per_sample;
    }
  }
  return rec;
}

// IEEE float-32 writer; decode(encode(x)) is bit-identical for float input.
inline std::vector<uint8_t> encode_wav_float32(const std::vector<std::vector<float>>& channels,
                                               int sample_rate) {
  if (channels.empty()) throw data_error("wav encode: no channels");
  size_t frames = channels[0].size();
  for (const auto& ch : channels)
    if (ch.size() != frames) throw data_error("wav encode: channels of unequal length");

  uint16_t nch = static_cast<uint16_t>(channels.size());
  uint32_t data_bytes = static_cast<uint32_t>(frames * nch * 4);

  std::vector<uint8_t> out;
  out.reserve(58 + data_bytes);
  auto tag = [&](const char* s) { out.insert(out.end(), s, s + 4); };
  tag("RIFF");
  append_u32le(out, 4 + (8 + 18) + (8 + 4) + (8 + data_bytes));
  tag("WAVE");
  tag("fmt ");
  append_u32le(out, 18);
  append_u16le(out, detail::kFormatFloat);
  append_u16le(out, nch);
  append_u32le(out, static_cast<uint32_t>(sample_rate));
  append_u32le(out, static_cast<uint32_t>(sample_rate) * nch * 4);
  append_u16le(out, static_cast<uint16_t>(nch * 4));
  append_u16le(out, 32);
  append_u16le(out, 0);  // cbSize
  tag("fact");
  append_u32le(out, 4);
  append_u32le(out, static_cast<uint32_t>(frames));
  tag("data");
  append_u32le(out, data_bytes);
  for (size_t i = 0; i < frames; ++i)
    for (int c = 0; c < nch; ++c) append_f32le(out, channels[c][i]);
  return out;
}

inline std::vector<uint8_t> encode_wav_float32_mono(const std::vector<float>& samples,
                                                    int sample_rate) {
  return encode_wav_float32({samples}, sample_rate);
}

}  // namespace respira::audio
