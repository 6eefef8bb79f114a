#pragma once

#include <functional>
#include <stdexcept>
#include <vector>

#include "enspost/tensor.hpp"

// Reverse-mode tape. Ops append a step per output as they execute, so the
// step list is in topological order by construction. backward() zeroes the
// gradients of every recorded output (intermediates belong to this graph),
// seeds the scalar loss with 1 and runs the steps in reverse, each closure
// accumulating into the gradients of the inputs it captured. Leaf tensors
// (parameters, inputs) are never recorded outputs, so their gradients
// accumulate across backward() calls until explicitly zeroed.

namespace enspost::nn {

template <typename T>
class Graph {
 public:
  void record(Tensor<T> out, std::function<void()> backward_fn,
              const char* op_name) {
    steps_.push_back(Step{std::move(out), std::move(backward_fn), op_name});
  }

  void backward(const Tensor<T>& loss) {
    if (!loss.defined() || !loss.is_scalar())
      throw std::invalid_argument(
          "backward() requires a scalar loss tensor, got shape " +
          (loss.defined() ? loss.shape().str() : std::string("(null)")));
    for (auto& s : steps_) {
      s.out.ensure_grad();
      s.out.zero_grad();
    }
    Tensor<T> l = loss;
    l.grad()[0] = T(1);
    visited_.clear();
    for (auto it = steps_.rbegin(); it != steps_.rend(); ++it) {
      it->fn();
      visited_.push_back(it->op_name);
    }
  }

  std::size_t size() const { return steps_.size(); }
  void clear() {
    steps_.clear();
    visited_.clear();
  }

  // Op names in the order the last backward() visited them (for tests).
  const std::vector<const char*>& visited() const { return visited_; }

 private:
  struct Step {
    Tensor<T> out;
    std::function<void()> fn;
    const char* op_name;
  };
  std::vector<Step> steps_;
  std::vector<const char*> visited_;
};

}  // namespace enspost::nn
