#pragma once

#include <cstdint>
#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

// Dense 4-D tensors in NCHW layout. A Tensor is a shared handle to its
// storage; ops hold handles inside backward closures, so storage lives as
// long as any graph that references it. Gradients are allocated lazily and
// accumulate until zero_grad() is called.

namespace enspost::nn {

struct Shape4 {
  std::int64_t n = 0, c = 0, h = 0, w = 0;

  std::int64_t size() const { return n * c * h * w; }
  bool operator==(const Shape4&) const = default;

  std::int64_t index(std::int64_t in, std::int64_t ic, std::int64_t ih,
                     std::int64_t iw) const {
    return ((in * c + ic) * h + ih) * w + iw;
  }

  std::string str() const {
    return "(" + std::to_string(n) + "," + std::to_string(c) + "," +
           std::to_string(h) + "," + std::to_string(w) + ")";
  }
};

template <typename T>
struct TensorData {
  Shape4 shape;
  std::vector<T> values;
  std::vector<T> grad;  // empty until ensure_grad
  bool requires_grad = false;
};

template <typename T>
class Tensor {
 public:
  using value_type = T;

  Tensor() = default;

  static Tensor zeros(Shape4 s, bool requires_grad = false) {
    Tensor t;
    t.d_ = std::make_shared<TensorData<T>>();
    t.d_->shape = s;
    t.d_->values.assign(static_cast<std::size_t>(s.size()), T(0));
    t.d_->requires_grad = requires_grad;
    if (requires_grad) t.ensure_grad();
    return t;
  }

  static Tensor full(Shape4 s, T v, bool requires_grad = false) {
    Tensor t = zeros(s, requires_grad);
    for (auto& x : t.d_->values) x = v;
    return t;
  }

  static Tensor from_data(Shape4 s, std::vector<T> vals,
                          bool requires_grad = false) {
    if (static_cast<std::int64_t>(vals.size()) != s.size())
      throw std::invalid_argument("tensor data size " +
                                  std::to_string(vals.size()) +
                                  " does not match shape " + s.str());
    Tensor t;
    t.d_ = std::make_shared<TensorData<T>>();
    t.d_->shape = s;
    t.d_->values = std::move(vals);
    t.d_->requires_grad = requires_grad;
    if (requires_grad) t.ensure_grad();
    return t;
  }

  static Tensor scalar(T v, bool requires_grad = false) {
    return from_data({1, 1, 1, 1}, {v}, requires_grad);
  }

  bool defined() const { return d_ != nullptr; }
  const Shape4& shape() const { return d_->shape; }
  std::int64_t size() const { return d_->shape.size(); }
  bool is_scalar() const { return d_ && d_->shape.size() == 1; }

  std::span<T> values() { return d_->values; }
  std::span<const T> values() const { return d_->values; }
  T* data() { return d_->values.data(); }
  const T* data() const { return d_->values.data(); }

  bool requires_grad() const { return d_->requires_grad; }
  void set_requires_grad(bool rg) {
    d_->requires_grad = rg;
    if (rg) ensure_grad();
  }

  void ensure_grad() {
    if (d_->grad.empty())
      d_->grad.assign(static_cast<std::size_t>(d_->shape.size()), T(0));
  }
  bool has_grad() const { return !d_->grad.empty(); }
  std::span<T> grad() {
    ensure_grad();
    return d_->grad;
  }
  std::span<const T> grad() const { return d_->grad; }
  T* grad_data() {
    ensure_grad();
    return d_->grad.data();
  }
  void zero_grad() {
    for (auto& g : d_->grad) g = T(0);
  }

  T& at(std::int64_t n, std::int64_t c, std::int64_t h, std::int64_t w) {
    return d_->values[static_cast<std::size_t>(d_->shape.index(n, c, h, w))];
  }
  T at(std::int64_t n, std::int64_t c, std::int64_t h, std::int64_t w) const {
    return d_->values[static_cast<std::size_t>(d_->shape.index(n, c, h, w))];
  }

  T item() const {
    if (!is_scalar())
      throw std::invalid_argument("item() on non-scalar tensor of shape " +
                                  d_->shape.str());
    return d_->values[0];
  }

  // Deep copy of values (grad not copied).
  Tensor clone() const {
    Tensor t;
    t.d_ = std::make_shared<TensorData<T>>();
    t.d_->shape = d_->shape;
    t.d_->values = d_->values;
    t.d_->requires_grad = d_->requires_grad;
    if (t.d_->requires_grad) t.ensure_grad();
    return t;
  }

  TensorData<T>* node() const { return d_.get(); }

 private:
  std::shared_ptr<TensorData<T>> d_;
};

}  // namespace enspost::nn
