#include "enspost/kernels.hpp"

#include "kernels_detail.hpp"

namespace enspost::kernels {

template <typename T>
const KernelTable<T>& scalar_table() {
  static const KernelTable<T> t = {
      detail::add<T>,    detail::sub<T>,
      detail::mul<T>,    detail::div<T>,
      detail::axpy<T>,   detail::scale<T>,
      detail::affine<T>, detail::dot<T>,
      detail::sum<T>,    detail::relu<T>,
      detail::relu_mask_add<T>, detail::adam_step<T>,
  };
  return t;
}

template const KernelTable<float>& scalar_table<float>();
template const KernelTable<double>& scalar_table<double>();

}  // namespace enspost::kernels
