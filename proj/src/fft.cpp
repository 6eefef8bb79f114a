#include "enspost/fft.hpp"

#include <numbers>
#include <stdexcept>

namespace enspost::fft {

bool is_pow2(std::size_t n) { return n > 0 && (n & (n - 1)) == 0; }

namespace {

// Cooley-Tukey with bit-reversal reordering. sign -1 forward, +1 inverse.
void transform(std::complex<double>* a, std::size_t n, int sign) {
  if (!is_pow2(n)) throw std::invalid_argument("fft: length not a power of two");
  for (std::size_t i = 1, j = 0; i < n; ++i) {
    std::size_t bit = n >> 1;
    for (; j & bit; bit >>= 1) j ^= bit;
    j ^= bit;
    if (i < j) std::swap(a[i], a[j]);
  }
  for (std::size_t len = 2; len <= n; len <<= 1) {
    double ang = sign * 2.0 * std::numbers::pi / static_cast<double>(len);
    std::complex<double> wl(std::cos(ang), std::sin(ang));
    for (std::size_t i = 0; i < n; i += len) {
      std::complex<double> w(1.0, 0.0);
      for (std::size_t k = 0; k < len / 2; ++k) {
        std::complex<double> u = a[i + k];
        std::complex<double> v = a[i + k + len / 2] * w;
        a[i + k] = u + v;
        a[i + k + len / 2] = u - v;
        w *= wl;
      }
    }
  }
}

void transform_2d(std::complex<double>* data, std::size_t h, std::size_t w,
                  int sign) {
  for (std::size_t i = 0; i < h; ++i) transform(data + i * w, w, sign);
  std::vector<std::complex<double>> col(h);
  for (std::size_t j = 0; j < w; ++j) {
    for (std::size_t i = 0; i < h; ++i) col[i] = data[i * w + j];
    transform(col.data(), h, sign);
    for (std::size_t i = 0; i < h; ++i) data[i * w + j] = col[i];
  }
}

}  // namespace

void forward(std::complex<double>* data, std::size_t n) {
  transform(data, n, -1);
}

void inverse(std::complex<double>* data, std::size_t n) {
  transform(data, n, +1);
  double s = 1.0 / static_cast<double>(n);
  for (std::size_t i = 0; i < n; ++i) data[i] *= s;
}

void forward_2d(std::complex<double>* data, std::size_t h, std::size_t w) {
  transform_2d(data, h, w, -1);
}

void inverse_2d(std::complex<double>* data, std::size_t h, std::size_t w) {
  transform_2d(data, h, w, +1);
  double s = 1.0 / static_cast<double>(h * w);
  for (std::size_t i = 0; i < h * w; ++i) data[i] *= s;
}

}  // namespace enspost::fft
