#pragma once

#include <vector>

#include "enspost/graph.hpp"
#include "enspost/tensor.hpp"

// Differentiable operations. Every op takes the graph as its first argument;
// passing nullptr runs pure inference (no step recorded, output carries no
// gradient). Gradients accumulate into inputs whose requires_grad is set.

namespace enspost::nn {

struct PadSpec {
  enum class Mode {
    zero,      // zeros outside the grid
    wrap_lon,  // periodic in W (longitude), zeros beyond the H edges
  };
  int top = 0, bottom = 0, left = 0, right = 0;
  Mode mode = Mode::zero;
};

// Padding that keeps spatial dims under stride 1; the odd cell goes to the
// high-index side.
PadSpec same_pad(int kh, int kw, int dilation, PadSpec::Mode mode);

struct Conv2dSpec {
  int stride = 1;
  int dilation = 1;
  PadSpec pad;
};

// x: (N,Cin,H,W), w: (Cout,Cin,Kh,Kw), bias: (1,Cout,1,1).
template <typename T>
Tensor<T> conv2d(Graph<T>* g, const Tensor<T>& x, const Tensor<T>& w,
                 const Tensor<T>& bias, const Conv2dSpec& spec);

// Per-gridpoint 1x1 filters. x: (N,Cin,H,W), w: (1,Cout*Cin,H,W) with the
// filter for output channel co at channels [co*Cin, (co+1)*Cin), bias:
// (1,Cout,H,W).
template <typename T>
Tensor<T> locally_connected(Graph<T>* g, const Tensor<T>& x,
                            const Tensor<T>& w, const Tensor<T>& bias);

// Doubles H and W; align_corners=false convention, i.e. output pixel i
// samples input coordinate (i + 0.5)/2 - 0.5, clamped to the edges.
template <typename T>
Tensor<T> bilinear_upsample_2x(Graph<T>* g, const Tensor<T>& x);

// 2x2 window, stride 2; requires even H and W. Ties go to the first element
// in row-major window order.
template <typename T>
Tensor<T> max_pool_2x2(Graph<T>* g, const Tensor<T>& x);

template <typename T>
struct BatchNormState {
  std::vector<T> running_mean;  // size C, init 0
  std::vector<T> running_var;   // size C, init 1
  explicit BatchNormState(std::int64_t c = 0)
      : running_mean(static_cast<std::size_t>(c), T(0)),
        running_var(static_cast<std::size_t>(c), T(1)) {}
};

// gamma/beta: (1,C,1,1). Training mode normalizes with biased batch moments
// and, when update_running is set, folds them into the running stats with
// an EMA (running = (1-momentum)*running + momentum*batch). Eval mode uses
// the running stats.
template <typename T>
Tensor<T> batch_norm(Graph<T>* g, const Tensor<T>& x, const Tensor<T>& gamma,
                     const Tensor<T>& beta, BatchNormState<T>& state,
                     bool training, bool update_running, T eps = T(1e-5),
                     T momentum = T(0.1));

template <typename T>
Tensor<T> concat_channels(Graph<T>* g, const std::vector<Tensor<T>>& xs);

template <typename T>
Tensor<T> narrow_channels(Graph<T>* g, const Tensor<T>& x, std::int64_t c0,
                          std::int64_t len);

// Element-wise binary ops with numpy-style broadcasting over the four axes
// (sizes must match or be 1 on either side).
template <typename T>
Tensor<T> add(Graph<T>* g, const Tensor<T>& a, const Tensor<T>& b);
template <typename T>
Tensor<T> sub(Graph<T>* g, const Tensor<T>& a, const Tensor<T>& b);
template <typename T>
Tensor<T> mul(Graph<T>* g, const Tensor<T>& a, const Tensor<T>& b);
template <typename T>
Tensor<T> div(Graph<T>* g, const Tensor<T>& a, const Tensor<T>& b);

template <typename T>
Tensor<T> add_scalar(Graph<T>* g, const Tensor<T>& x, T s);
template <typename T>
Tensor<T> mul_scalar(Graph<T>* g, const Tensor<T>& x, T s);

template <typename T>
Tensor<T> relu(Graph<T>* g, const Tensor<T>& x);
template <typename T>
Tensor<T> sigmoid(Graph<T>* g, const Tensor<T>& x);
template <typename T>
Tensor<T> softplus(Graph<T>* g, const Tensor<T>& x);
template <typename T>
Tensor<T> exp(Graph<T>* g, const Tensor<T>& x);
template <typename T>
Tensor<T> erf(Graph<T>* g, const Tensor<T>& x);

template <typename T>
Tensor<T> sum_all(Graph<T>* g, const Tensor<T>& x);
template <typename T>
Tensor<T> mean_all(Graph<T>* g, const Tensor<T>& x);

// Per-element CRPS of a Gaussian N(mu, sigma^2) against observation y:
//   crps = d*erf(d/(sqrt(2)*sigma)) + sigma/sqrt(pi)*(sqrt(2)*exp(-d^2/(2*sigma^2)) - 1)
// with d = y - mu. Requires sigma > 0 everywhere (floored upstream).
template <typename T>
Tensor<T> crps_gaussian_map(Graph<T>* g, const Tensor<T>& mu,
                            const Tensor<T>& sigma, const Tensor<T>& y);

// Sum of |w[p] - w[q]| over horizontally and vertically adjacent gridpoint
// pairs, over all (n, c) slices. Adjacency does not cross the longitude
// seam. Subgradient at equal values is zero.
template <typename T>
Tensor<T> l1_adjacent_penalty(Graph<T>* g, const Tensor<T>& w);

struct SsimSpec {
  int window = 11;
  double sigma = 1.5;
  double c1 = 0.0;  // (k1 * data_range)^2, chosen by the caller
  double c2 = 0.0;
};

// Mean SSIM over the valid (un-padded) region, averaged over channels.
// Built from the ops above, so it is differentiable in both arguments and
// exactly symmetric for fixed c1/c2.
template <typename T>
Tensor<T> ssim(Graph<T>* g, const Tensor<T>& a, const Tensor<T>& b,
               const SsimSpec& spec);

}  // namespace enspost::nn
