#pragma once

#include <complex>
#include <cstddef>
#include <vector>

// Minimal iterative radix-2 FFT, enough for spectral field synthesis on
// power-of-two grids. Forward is unscaled; inverse applies 1/n.

namespace enspost::fft {

bool is_pow2(std::size_t n);

// In-place 1-D transform. n must be a power of two.
void forward(std::complex<double>* data, std::size_t n);
void inverse(std::complex<double>* data, std::size_t n);

// In-place 2-D transform on row-major h*w data; both dims powers of two.
void forward_2d(std::complex<double>* data, std::size_t h, std::size_t w);
void inverse_2d(std::complex<double>* data, std::size_t h, std::size_t w);

}  // namespace enspost::fft
