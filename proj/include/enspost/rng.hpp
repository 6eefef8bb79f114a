#pragma once

#include <cstdint>
#include <string_view>

// Counter-based random streams built on the SplitMix64 output function.
// A stream is (key, counter); draw i is mix(key + i * GOLDEN), so streams
// are pure functions of their key and position. Keys are derived from a
// user seed plus a purpose label and up to two integer coordinates
// (typically date and member), which makes every consumer independent of
// the draw order of every other consumer.
//
// Stream-splitting rule used across the project:
//   derive_key(seed, "truth")                          spectral truth evolution
//   derive_key(seed, "bias_field")                     hidden systematic error
//   derive_key(seed, "member_speed", date, m)          per-member advection jitter
//   derive_key(seed, "member_noise", date*3 + lead, m) per-member noise field
//   derive_key(seed, "init", layer_index)              parameter initialization
//   derive_key(seed, "shuffle", epoch)                 batch order
// New consumers must pick a fresh purpose label instead of reusing one.

namespace enspost::rng {

constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ull;

inline std::uint64_t mix64(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

std::uint64_t derive_key(std::uint64_t seed, std::string_view purpose,
                         std::uint64_t a = 0, std::uint64_t b = 0);

class Stream {
 public:
  Stream() : key_(0) {}
  explicit Stream(std::uint64_t key) : key_(key) {}

  std::uint64_t next_u64() { return mix64(key_ + (++counter_) * kGolden); }

  // Uniform in [0, 1) with 53 random bits.
  double next_unit() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  // Standard normal via Box-Muller; consumes two uniforms per pair.
  double next_gaussian();

  // N(0, stddev^2) resampled until within +-2 stddev.
  double next_truncated(double stddev);

 private:
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace enspost::rng
