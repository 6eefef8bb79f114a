#include "enspost/rng.hpp"

#include <cmath>

namespace enspost::rng {

std::uint64_t derive_key(std::uint64_t seed, std::string_view purpose,
                         std::uint64_t a, std::uint64_t b) {
  std::uint64_t k = mix64(seed + kGolden);
  for (const char c : purpose)
    k = mix64(k ^ static_cast<std::uint64_t>(static_cast<unsigned char>(c)));
  k = mix64(k ^ a);
  k = mix64(k ^ (b + kGolden));
  return k;
}

double Stream::next_gaussian() {
  if (has_spare_) {
    has_spare_ = false;
    return spare_;
  }
  // Guard against log(0).
  double u1 = next_unit();
  while (u1 <= 0.0) u1 = next_unit();
  const double u2 = next_unit();
  const double r = std::sqrt(-2.0 * std::log(u1));
  const double theta = 2.0 * M_PI * u2;
  spare_ = r * std::sin(theta);
  has_spare_ = true;
  return r * std::cos(theta);
}

double Stream::next_truncated(double stddev) {
  for (;;) {
    const double z = next_gaussian();
    if (z >= -2.0 && z <= 2.0) return z * stddev;
  }
}

}  // namespace enspost::rng
