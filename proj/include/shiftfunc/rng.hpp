#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>

namespace shiftfunc {

inline constexpr std::uint64_t kGolden64 = 0x9E3779B97F4A7C15ull;

// SplitMix64 finalizer. Bijective on 64-bit words.
inline std::uint64_t mix64(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

// Substream key derivation rule (fixed, documented):
//   child(key, i) = mix64(key ^ mix64(i + kGolden64)).
// mix64 is a bijection, so for a fixed key distinct indices yield distinct
// child keys.
inline std::uint64_t derive_stream_key(std::uint64_t key, std::uint64_t index) {
  return mix64(key ^ mix64(index + kGolden64));
}

struct SeedSpec {
  std::uint64_t master_seed = 0;

  std::uint64_t substream(std::uint64_t index) const {
    return derive_stream_key(master_seed, index);
  }
};

// Deterministic, splittable random stream: xoshiro256++ seeded from a 64-bit
// key via a SplitMix64 sequence. fork(i) derives a child stream from the key
// alone, so the child is independent of how much the parent has generated.
class RngStream {
 public:
  explicit RngStream(std::uint64_t key) : key_(key) {
    std::uint64_t s = key;
    for (auto& word : state_) {
      s += kGolden64;
      word = mix64(s);
    }
    if ((state_[0] | state_[1] | state_[2] | state_[3]) == 0) state_[0] = kGolden64;
  }

  static RngStream from_seed(const SeedSpec& seed) { return RngStream(seed.master_seed); }

  std::uint64_t key() const { return key_; }

  RngStream fork(std::uint64_t index) const {
    return RngStream(derive_stream_key(key_, index));
  }

  std::uint64_t next_u64() {
    const std::uint64_t result = rotl(state_[0] + state_[3], 23) + state_[0];
    const std::uint64_t t = state_[1] << 17;
    state_[2] ^= state_[0];
    state_[3] ^= state_[1];
    state_[1] ^= state_[2];
    state_[0] ^= state_[3];
    state_[2] ^= t;
    state_[3] = rotl(state_[3], 45);
    return result;
  }

  // [0, 1)
  double uniform01() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  // (0, 1]
  double uniform01_open0() {
    return static_cast<double>((next_u64() >> 11) + 1) * 0x1.0p-53;
  }

  // Standard normal via Box-Muller; the second value of each pair is cached.
  double normal() {
    if (have_cached_) {
      have_cached_ = false;
      return cached_;
    }
    const double u1 = uniform01_open0();
    const double u2 = uniform01();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double a = 2.0 * std::numbers::pi * u2;
    cached_ = r * std::sin(a);
    have_cached_ = true;
    return r * std::cos(a);
  }

 private:
  static std::uint64_t rotl(std::uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }

  std::uint64_t key_;
  std::array<std::uint64_t, 4> state_{};
  bool have_cached_ = false;
  double cached_ = 0.0;
};

}  // namespace shiftfunc
