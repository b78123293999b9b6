#pragma once

#include <array>
#include <cmath>
#include <cstdint>

namespace vlab {

/// Philox4x32-10 counter-based generator.
///
/// All randomness in a run flows from one 64-bit seed (the key). Independent
/// streams are addressed by a 64-bit stream id stored in the upper half of the
/// 128-bit counter; the lower half indexes draws within the stream. Streams
/// split deterministically, so sample i of epoch e is reproducible without
/// replaying anything: stream(seed).split(epoch).split(i).
class Rng {
 public:
  explicit Rng(uint64_t seed, uint64_t stream = 0) : seed_(seed), stream_(stream) {}

  static std::array<uint32_t, 4> philox4x32(std::array<uint32_t, 4> ctr, std::array<uint32_t, 2> key) {
    constexpr uint32_t m0 = 0xD2511F53u, m1 = 0xCD9E8D57u;
    constexpr uint32_t w0 = 0x9E3779B9u, w1 = 0xBB67AE85u;
    for (int round = 0; round < 10; ++round) {
      uint64_t p0 = uint64_t(m0) * ctr[0];
      uint64_t p1 = uint64_t(m1) * ctr[2];
      ctr = {uint32_t(p1 >> 32) ^ ctr[1] ^ key[0], uint32_t(p1), uint32_t(p0 >> 32) ^ ctr[3] ^ key[1],
             uint32_t(p0)};
      key[0] += w0;
      key[1] += w1;
    }
    return ctr;
  }

  /// Random access into the stream: the i-th 32-bit draw. One Philox block
  /// yields four lanes, so draw i lives in block i/4, lane i%4.
  uint32_t u32_at(uint64_t i) const {
    uint64_t block = i >> 2;
    std::array<uint32_t, 4> ctr = {uint32_t(block), uint32_t(block >> 32), uint32_t(stream_),
                                   uint32_t(stream_ >> 32)};
    std::array<uint32_t, 2> key = {uint32_t(seed_), uint32_t(seed_ >> 32)};
    return philox4x32(ctr, key)[i & 3];
  }

  /// Uniform in [0,1) with 24 mantissa bits, from draw i.
  float float_at(uint64_t i) const { return float(u32_at(i) >> 8) * (1.0f / 16777216.0f); }

  float uniform_at(uint64_t i, float lo, float hi) const { return lo + (hi - lo) * float_at(i); }

  // Sequential interface over the same stream.
  uint32_t next_u32() { return u32_at(pos_++); }
  float next_float() { return float(next_u32() >> 8) * (1.0f / 16777216.0f); }
  float uniform(float lo, float hi) { return lo + (hi - lo) * next_float(); }
  double next_double() {
    uint64_t hi = next_u32(), lo = next_u32();
    return double(((hi << 32) | lo) >> 11) * (1.0 / 9007199254740992.0);
  }

  /// Integer in [0, n) by rejection-free scaling; n must be >= 1.
  uint64_t next_below(uint64_t n) {
    // 64-bit draw reduced by multiply-shift; bias is negligible for desk-scale n.
    uint64_t hi = next_u32(), lo = next_u32();
    uint64_t x = (hi << 32) | lo;
    return uint64_t((unsigned __int128)x * n >> 64);
  }

  /// Derive an independent child stream. Mixing constant is the golden-ratio
  /// increment; children of distinct (stream, tag) pairs never collide in
  /// practice because the map is a bijection composed with distinct offsets.
  Rng split(uint64_t tag) const {
    uint64_t s = stream_ * 0x9E3779B97F4A7C15ull + tag + 1;
    s ^= s >> 31;
    s *= 0xBF58476D1CE4E5B9ull;
    s ^= s >> 29;
    return Rng(seed_, s);
  }

  uint64_t seed() const { return seed_; }
  uint64_t stream() const { return stream_; }

 private:
  uint64_t seed_;
  uint64_t stream_;
  uint64_t pos_ = 0;
};

}  // namespace vlab
