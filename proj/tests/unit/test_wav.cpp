#include <doctest.h>

#include <cstring>
#include <vector>

#include "respira/audio/wav.hpp"
#include "respira/core/binio.hpp"
#include "respira/core/error.hpp"
#include "respira/core/rng.hpp"

using namespace respira;
using namespace respira::audio;

namespace {

// Minimal PCM writer for test fixtures (the library itself only encodes
// float-32).
std::vector<uint8_t> make_pcm16_wav(const std::vector<std::vector<int16_t>>& channels, int rate,
                                    int truncate_bytes = 0) {
  uint16_t nch = static_cast<uint16_t>(channels.size());
  size_t frames = channels[0].size();
  uint32_t data_bytes = static_cast<uint32_t>(frames * nch * 2) - static_cast<uint32_t>(truncate_bytes);
  std::vector<uint8_t> out;
  auto tag = [&](const char* s) { out.insert(out.end(), s, s + 4); };
  tag("RIFF");
  append_u32le(out, 4 + 8 + 16 + 8 + data_bytes);
  tag("WAVE");
  tag("fmt ");
  append_u32le(out, 16);
  append_u16le(out, 1);  // PCM
  append_u16le(out, nch);
  append_u32le(out, static_cast<uint32_t>(rate));
  append_u32le(out, static_cast<uint32_t>(rate) * nch * 2);
  append_u16le(out, static_cast<uint16_t>(nch * 2));
  append_u16le(out, 16);
  tag("data");
  append_u32le(out, data_bytes);
  size_t emitted = 0;
  for (size_t i = 0; i < frames && emitted < data_bytes; ++i)
    for (int c = 0; c < nch && emitted < data_bytes; ++c) {
      append_u16le(out, static_cast<uint16_t>(channels[static_cast<size_t>(c)][i]));
      emitted += 2;
    }
  return out;
}

}  // namespace

TEST_CASE("wav: PCM-16 constant 16384 decodes to 0.5") {
  std::vector<int16_t> samples(16000, 16384);
  auto bytes = make_pcm16_wav({samples}, 16000);
  RawRecording rec = decode_wav(bytes);
  CHECK(rec.sample_rate == 16000);
  CHECK(rec.channel_count() == 1);
  CHECK(rec.frames() == 16000);
  for (double v : rec.channels[0]) CHECK(v == doctest::Approx(0.5).epsilon(1e-9));
}

TEST_CASE("wav: data chunk with unequal channel lengths is rejected") {
  std::vector<int16_t> l(100, 1000), r(100, -1000);
  auto bytes = make_pcm16_wav({l, r}, 8000, /*truncate_bytes=*/2);
  CHECK_THROWS_AS(decode_wav(bytes), Error);
  try {
    decode_wav(bytes);
  } catch (const Error& e) {
    CHECK(std::string(e.what()).find("data") != std::string::npos);
  }
}

TEST_CASE("wav: float-32 encode/decode round-trips bit-identically") {
  std::vector<float> samples;
  respira::Rng rng(5);
  for (int i = 0; i < 4096; ++i) samples.push_back(static_cast<float>(rng.uniform(-1.0, 1.0)));
  auto bytes = encode_wav_float32_mono(samples, 16000);
  RawRecording rec = decode_wav(bytes);
  REQUIRE(rec.frames() == samples.size());
  for (size_t i = 0; i < samples.size(); ++i) {
    float back = static_cast<float>(rec.channels[0][i]);
    CHECK(std::memcmp(&back, &samples[i], 4) == 0);
  }
}

TEST_CASE("wav: malformed headers name the offending chunk") {
  std::vector<uint8_t> junk = {'J', 'U', 'N', 'K', 0, 0, 0, 0, 'W', 'A', 'V', 'E'};
  try {
    decode_wav(junk);
    FAIL("expected decode error");
  } catch (const Error& e) {
    CHECK(std::string(e.what()).find("RIFF") != std::string::npos);
  }

  auto bytes = make_pcm16_wav({{0, 0, 0, 0}}, 8000);
  std::memcpy(bytes.data() + 8, "WAVX", 4);
  try {
    decode_wav(bytes);
    FAIL("expected decode error");
  } catch (const Error& e) {
    CHECK(std::string(e.what()).find("WAVE") != std::string::npos);
  }
}

TEST_CASE("wav: unsupported encodings are reported explicitly") {
  auto bytes = make_pcm16_wav({{0, 0, 0, 0}}, 8000);
  // Patch the format code to mu-law (7).
  bytes[20] = 7;
  try {
    decode_wav(bytes);
    FAIL("expected unsupported-format error");
  } catch (const Error& e) {
    CHECK(std::string(e.what()).find("unsupported") != std::string::npos);
  }
}

TEST_CASE("wav: PCM-24 scaling") {
  // One frame, value 0x400000 = 2^22 -> 0.5.
  std::vector<uint8_t> out;
  auto tag = [&](const char* s) { out.insert(out.end(), s, s + 4); };
  tag("RIFF");
  append_u32le(out, 4 + 8 + 16 + 8 + 3);
  tag("WAVE");
  tag("fmt ");
  append_u32le(out, 16);
  append_u16le(out, 1);
  append_u16le(out, 1);
  append_u32le(out, 16000);
  append_u32le(out, 16000 * 3);
  append_u16le(out, 3);
  append_u16le(out, 24);
  tag("data");
  append_u32le(out, 3);
  out.push_back(0x00);
  out.push_back(0x00);
  out.push_back(0x40);
  RawRecording rec = decode_wav(out);
  REQUIRE(rec.frames() == 1);
  CHECK(rec.channels[0][0] == doctest::Approx(0.5).epsilon(1e-9));
}
