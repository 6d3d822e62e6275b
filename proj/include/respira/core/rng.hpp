#pragma once
#include <cmath>
#include <cstdint>
#include <string_view>

namespace respira {

// Counter-based pseudo-random generator. Output n of a stream keyed by k is
// mix(k + n * GOLDEN), where mix is the SplitMix64 finalizer, so a stream is a
// pure function of (key, counter). Streams are derived by hashing tags into
// the key, which gives reproducible per-(epoch, sample) substreams without
// sharing any mutable state between consumers.
class Rng {
public:
  Rng() : key_(0) {}
  explicit Rng(uint64_t seed) : key_(mix(seed ^ kDomain)) {}

  // Child generator for an independent substream. Order of derivation does
  // not matter; only the tag path does.
  Rng derive(uint64_t tag) const {
    Rng child;
    child.key_ = mix(key_ ^ mix(tag + kTagSalt));
    return child;
  }
  Rng derive(std::string_view name) const { return derive(hash_name(name)); }
  Rng derive(std::string_view name, uint64_t a) const { return derive(name).derive(a); }
  Rng derive(std::string_view name, uint64_t a, uint64_t b) const {
    return derive(name).derive(a).derive(b);
  }

  uint64_t next_u64() { return mix(key_ + (++counter_) * kGolden); }

  // Uniform in [0, 1) with 53-bit resolution.
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Box-Muller; consumes two uniforms per call, second branch discarded to
  // keep the stream position independent of caller buffering.
  double gaussian() {
    double u1 = uniform();
    double u2 = uniform();
    if (u1 < 1e-300) u1 = 1e-300;
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586476925286766559 * u2);
  }

  // Uniform integer in [0, n).
  uint64_t below(uint64_t n) {
    if (n <= 1) return 0;
    // Multiply-shift reduction; bias is < 2^-64 * n, irrelevant here.
    return static_cast<uint64_t>((static_cast<__uint128_t>(next_u64()) * n) >> 64);
  }

  template <typename Vec>
  void shuffle(Vec& v) {
    for (size_t i = v.size(); i > 1; --i) {
      size_t j = static_cast<size_t>(below(i));
      std::swap(v[i - 1], v[j]);
    }
  }

  static uint64_t hash_name(std::string_view s) {
    uint64_t h = 0xcbf29ce484222325ull;  // FNV-1a
    for (unsigned char c : s) {
      h ^= c;
      h *= 0x100000001b3ull;
    }
    return h;
  }

private:
  static constexpr uint64_t kGolden = 0x9e3779b97f4a7c15ull;
  static constexpr uint64_t kDomain = 0x5245535049524121ull;
  static constexpr uint64_t kTagSalt = 0xd6e8feb86659fd93ull;

  static uint64_t mix(uint64_t z) {
    z += kGolden;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
  }

  uint64_t key_;
  uint64_t counter_ = 0;
};

}  // namespace respira
