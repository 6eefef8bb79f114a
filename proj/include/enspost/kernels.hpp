#pragma once

#include <cstddef>

// Flat-array compute kernels used by the tensor engine and the optimizer.
// Two implementations exist: a scalar reference and an AVX2/FMA variant.
// The active backend is resolved once at startup (CPU probe, overridable
// via the ENSPOST_KERNELS environment variable or set_active_backend) and
// stays fixed for the lifetime of the process, so repeated runs on one
// machine use identical code paths.
//
// Reductions accumulate in a fixed lane order per backend; scalar and AVX2
// results may differ in the last bits and are compared with tolerances.

namespace enspost::kernels {

enum class Backend { scalar, avx2 };

const char* backend_name(Backend b);
bool backend_supported(Backend b);

Backend active_backend();
// Tests use this to pin a backend; throws if unsupported on this machine.
void set_active_backend(Backend b);

template <typename T>
struct KernelTable {
  // out[i] = a[i] op b[i]
  void (*add)(const T* a, const T* b, T* out, std::size_t n);
  void (*sub)(const T* a, const T* b, T* out, std::size_t n);
  void (*mul)(const T* a, const T* b, T* out, std::size_t n);
  void (*div)(const T* a, const T* b, T* out, std::size_t n);
  // y[i] += alpha * x[i]
  void (*axpy)(T alpha, const T* x, T* y, std::size_t n);
  // y[i] *= alpha
  void (*scale)(T alpha, T* y, std::size_t n);
  // y[i] = alpha * x[i] + beta
  void (*affine)(T alpha, T beta, const T* x, T* y, std::size_t n);
  T (*dot)(const T* a, const T* b, std::size_t n);
  T (*sum)(const T* a, std::size_t n);
  void (*relu)(const T* x, T* out, std::size_t n);
  // dx[i] += x[i] > 0 ? dy[i] : 0
  void (*relu_mask_add)(const T* x, const T* dy, T* dx, std::size_t n);
  // Bias-corrected Adam; c1 = 1/(1-b1^t), c2 = 1/(1-b2^t).
  void (*adam_step)(T* p, const T* g, T* m, T* v, std::size_t n, T lr, T b1,
                    T b2, T eps, T c1, T c2);
};

template <typename T>
const KernelTable<T>& table(Backend b);

// Table for the active backend.
template <typename T>
inline const KernelTable<T>& active() {
  return table<T>(active_backend());
}

}  // namespace enspost::kernels
