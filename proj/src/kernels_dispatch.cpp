#include <cstdlib>
#include <stdexcept>
#include <string>

#include "kernels_backends.hpp"

namespace enspost::kernels {

namespace {

bool cpu_has_avx2() {
#if defined(__x86_64__) || defined(__i386__)
  return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
  return false;
#endif
}

Backend resolve_initial() {
  if (const char* env = std::getenv("ENSPOST_KERNELS")) {
    const std::string v(env);
    if (v == "scalar") return Backend::scalar;
    if (v == "avx2" && backend_supported(Backend::avx2)) return Backend::avx2;
    // Unknown or unsupported request: fall through to the probe.
  }
  return backend_supported(Backend::avx2) ? Backend::avx2 : Backend::scalar;
}

Backend& active_slot() {
  static Backend b = resolve_initial();
  return b;
}

}  // namespace

const char* backend_name(Backend b) {
  switch (b) {
    case Backend::scalar: return "scalar";
    case Backend::avx2: return "avx2";
  }
  return "?";
}

bool backend_supported(Backend b) {
  if (b == Backend::scalar) return true;
  return avx2_compiled() && cpu_has_avx2();
}

Backend active_backend() { return active_slot(); }

void set_active_backend(Backend b) {
  if (!backend_supported(b))
    throw std::runtime_error(std::string("kernel backend not supported here: ") +
                             backend_name(b));
  active_slot() = b;
}

template <typename T>
const KernelTable<T>& table(Backend b) {
  return b == Backend::avx2 ? avx2_table<T>() : scalar_table<T>();
}

template const KernelTable<float>& table<float>(Backend);
template const KernelTable<double>& table<double>(Backend);

}  // namespace enspost::kernels
