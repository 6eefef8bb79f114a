#pragma once

#include "enspost/kernels.hpp"

namespace enspost::kernels {

template <typename T>
const KernelTable<T>& scalar_table();

// Defined in kernels_avx2.cpp; falls back to the scalar table when the file
// was built without AVX2 support (non-x86 targets).
template <typename T>
const KernelTable<T>& avx2_table();
bool avx2_compiled();

}  // namespace enspost::kernels
