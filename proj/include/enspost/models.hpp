#pragma once

#include <array>
#include <cstdint>
#include <deque>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "enspost/dataset.hpp"
#include "enspost/graph.hpp"
#include "enspost/ops.hpp"
#include "enspost/preprocess.hpp"
#include "enspost/rng.hpp"
#include "enspost/tensor.hpp"

// The two post-processing networks and their composition. Both consume the
// assemble_batch channel layout (see dataset.hpp): per lead time a reduced
// mean, a reduced spread and the member fields, leads ordered 0/24/48 h.

namespace enspost::nn {

enum class Head { spread, bias, crps };

std::string head_name(Head h);
Head head_from_name(const std::string& s);

struct ModelConfig {
  int grid_h = 32;
  int grid_w = 64;
  int n_input_members = 5;
  int base_filters = 32;  // spread-net trunk width, must be even
  int n_inception_blocks = 10;
  std::array<int, 3> dilation_rates{1, 2, 4};
  int unet_levels = 3;  // 0 = per-gridpoint corrector, no conv trunk
  bool lcn_enabled = true;
  double l1_adjacent_weight = 0.0;
  bool wrap_longitude = true;
  Head head = Head::spread;
  double mix_lr_gain = 64.0;  // Adam lr multiplier for the mix weight

  int channels() const { return 3 * (2 + n_input_members); }
  PadSpec::Mode pad_mode() const {
    return wrap_longitude ? PadSpec::Mode::wrap_lon : PadSpec::Mode::zero;
  }
  void validate() const;
  nlohmann::json to_json() const;
  static ModelConfig from_json(const nlohmann::json& j);
};

// Initialization: truncated normal (std 0.05, resampled outside +-2 std) for
// conv and LCN weights, zeros for biases. Each parameter draws from its own
// stream keyed by registration index, so values do not depend on the sizes
// of earlier parameters.
inline constexpr double kInitStd = 0.05;

enum class Init { zeros, constant, trunc_normal };

template <typename T>
struct ParamEntry {
  std::string name;
  Tensor<T> tensor;
  double lr_gain = 1.0;
};

// Non-trained state saved with the model (batch-norm running stats).
template <typename T>
struct BufferEntry {
  std::string name;
  std::vector<T>* data = nullptr;
};

// Owns every parameter and buffer of one model, in declaration order.
// Checkpoints serialize the store in exactly this order, so construction
// order is part of the file format.
template <typename T>
class ParamStore {
 public:
  explicit ParamStore(std::uint64_t seed) : seed_(seed) {}
  ParamStore(const ParamStore&) = delete;
  ParamStore& operator=(const ParamStore&) = delete;

  Tensor<T> param(const std::string& name, Shape4 shape, Init init,
                  T arg = T(0), double lr_gain = 1.0) {
    for (const auto& p : params_)
      if (p.name == name)
        throw std::invalid_argument("duplicate parameter name " + name);
    Tensor<T> t = Tensor<T>::zeros(shape, true);
    if (init == Init::constant) {
      for (auto& v : t.values()) v = arg;
    } else if (init == Init::trunc_normal) {
      rng::Stream s(rng::derive_key(seed_, "init", params_.size()));
      for (auto& v : t.values())
        v = static_cast<T>(s.next_truncated(static_cast<double>(arg)));
    }
    params_.push_back(ParamEntry<T>{name, t, lr_gain});
    return t;
  }

  BatchNormState<T>& bn_state(const std::string& name, std::int64_t c) {
    bn_states_.emplace_back(c);
    BatchNormState<T>& st = bn_states_.back();
    buffers_.push_back(BufferEntry<T>{name + ".running_mean", &st.running_mean});
    buffers_.push_back(BufferEntry<T>{name + ".running_var", &st.running_var});
    return st;
  }

  std::vector<ParamEntry<T>>& params() { return params_; }
  const std::vector<ParamEntry<T>>& params() const { return params_; }
  std::vector<BufferEntry<T>>& buffers() { return buffers_; }
  const std::vector<BufferEntry<T>>& buffers() const { return buffers_; }

  std::int64_t n_parameters() const {
    std::int64_t n = 0;
    for (const auto& p : params_) n += p.tensor.size();
    return n;
  }

  Tensor<T> find(const std::string& name) const {
    for (const auto& p : params_)
      if (p.name == name) return p.tensor;
    throw std::out_of_range("no parameter named " + name);
  }

  void zero_grad() {
    for (auto& p : params_) p.tensor.zero_grad();
  }

 private:
  std::uint64_t seed_ = 0;
  std::vector<ParamEntry<T>> params_;
  std::vector<BufferEntry<T>> buffers_;
  std::deque<BatchNormState<T>> bn_states_;  // stable addresses
};

template <typename T>
struct Conv2dLayer {
  Tensor<T> w, b;
  Conv2dSpec spec;
  Tensor<T> forward(Graph<T>* g, const Tensor<T>& x) const {
    return conv2d(g, x, w, b, spec);
  }
};

template <typename T>
Conv2dLayer<T> make_conv(ParamStore<T>& ps, const std::string& name,
                         std::int64_t cin, std::int64_t cout, int k,
                         int dilation, PadSpec::Mode mode, Init weight_init) {
  Conv2dLayer<T> layer;
  layer.w = ps.param(name + ".w", {cout, cin, k, k}, weight_init, T(kInitStd));
  layer.b = ps.param(name + ".b", {1, cout, 1, 1}, Init::zeros);
  layer.spec.dilation = dilation;
  layer.spec.pad = same_pad(k, k, dilation, mode);
  return layer;
}

template <typename T>
struct BatchNormLayer {
  Tensor<T> gamma, beta;
  BatchNormState<T>* state = nullptr;
  Tensor<T> forward(Graph<T>* g, const Tensor<T>& x, bool training) const {
    return batch_norm(g, x, gamma, beta, *state, training,
                      /*update_running=*/training);
  }
};

template <typename T>
BatchNormLayer<T> make_bn(ParamStore<T>& ps, const std::string& name,
                          std::int64_t c) {
  BatchNormLayer<T> bn;
  bn.gamma = ps.param(name + ".gamma", {1, c, 1, 1}, Init::constant, T(1));
  bn.beta = ps.param(name + ".beta", {1, c, 1, 1}, Init::zeros);
  bn.state = &ps.bn_state(name, c);
  return bn;
}

template <typename T>
struct ConvBnRelu {
  Conv2dLayer<T> conv;
  BatchNormLayer<T> bn;
  Tensor<T> forward(Graph<T>* g, const Tensor<T>& x, bool training) const {
    return relu(g, bn.forward(g, conv.forward(g, x), training));
  }
};

template <typename T>
ConvBnRelu<T> make_cbr(ParamStore<T>& ps, const std::string& name,
                       std::int64_t cin, std::int64_t cout, int k, int dilation,
                       PadSpec::Mode mode) {
  ConvBnRelu<T> blk;
  blk.conv = make_conv(ps, name, cin, cout, k, dilation, mode,
                       Init::trunc_normal);
  blk.bn = make_bn(ps, name + ".bn", cout);
  return blk;
}

// Per-gridpoint 1x1 filters; see locally_connected for the weight layout.
template <typename T>
struct LcnLayer {
  Tensor<T> w, b;
  Tensor<T> forward(Graph<T>* g, const Tensor<T>& x) const {
    return locally_connected(g, x, w, b);
  }
};

// Spread (uncertainty) network. Non-spread channels pass through a two-layer
// 1x1 encoder to kEncodedChannels; the encoding concatenated with the three
// raw spread channels forms the context that is re-appended to every block
// input. Blocks are residual: three dilated 3x3 branches, each behind its
// own 1x1 reduction to base_filters/2, concatenated and projected back.
// Output mixes the network sigma with the 48 h input spread through a
// per-gridpoint sigmoid weight initialized so the mix starts at the input
// spread.
inline constexpr int kEncodedChannels = 8;
inline constexpr double kMixInit = -8.0;     // pre-sigmoid, s(-8) ~ 3.4e-4
inline constexpr double kSigmaFloor = 1e-4;  // standardized units

template <typename T>
class SpreadNet {
 public:
  SpreadNet(const ModelConfig& cfg, std::uint64_t seed);
  SpreadNet(const SpreadNet&) = delete;
  SpreadNet& operator=(const SpreadNet&) = delete;

  // Encoded context: (N, kEncodedChannels + 3, H, W).
  Tensor<T> context(Graph<T>* g, const Tensor<T>& input, bool training);
  // Trunk input, the context projected to base_filters channels.
  Tensor<T> stem(Graph<T>* g, const Tensor<T>& input, bool training);
  // Residual trunk output, (N, base_filters, H, W).
  Tensor<T> trunk(Graph<T>* g, const Tensor<T>& input, bool training);
  // sigma_hat, (N, 1, H, W), strictly positive.
  Tensor<T> forward(Graph<T>* g, const Tensor<T>& input, bool training);

  const ModelConfig& config() const { return cfg_; }
  ParamStore<T>& store() { return store_; }
  const ParamStore<T>& store() const { return store_; }
  Tensor<T> mix_weight() const { return w_; }

  // Set by the trainer; 0 = untrained.
  std::uint64_t las_fingerprint = 0;

 private:
  Tensor<T> trunk_of(Graph<T>* g, const Tensor<T>& ctx, bool training);
  void check_input(const Tensor<T>& input) const;

  ModelConfig cfg_;
  ParamStore<T> store_;
  ConvBnRelu<T> enc1_, enc2_;
  Conv2dLayer<T> stem_;
  struct Block {
    std::array<ConvBnRelu<T>, 3> reduce;
    std::array<ConvBnRelu<T>, 3> dilated;
    Conv2dLayer<T> proj;
  };
  std::vector<Block> blocks_;
  Conv2dLayer<T> head_;
  Tensor<T> w_;
};

// Bias-correction U-Net. unet_levels encoder/decoder levels at widths 16,
// 32, 64, bottleneck at twice the deepest width; decoder steps are bilinear
// upsampling + 3x3 conv, skip concatenation, then two conv blocks. The head
// (locally connected when lcn_enabled, else a 1x1 conv) is zero-initialized
// so the untrained net is an exact no-op on the mean. With unet_levels == 0
// the head reads the input channels directly.
inline constexpr int kUnetBaseWidth = 16;

template <typename T>
class BiasNet {
 public:
  BiasNet(const ModelConfig& cfg, std::uint64_t seed);
  BiasNet(const BiasNet&) = delete;
  BiasNet& operator=(const BiasNet&) = delete;

  // Predicted correction, (N, 1, H, W).
  Tensor<T> forward(Graph<T>* g, const Tensor<T>& input, bool training);
  // 48 h mean channel plus the correction, standardized units.
  Tensor<T> corrected_mean(Graph<T>* g, const Tensor<T>& input, bool training);
  // Deepest features before the decoder: (N, 2 * deepest width, H/2^L, W/2^L).
  Tensor<T> bottleneck_features(Graph<T>* g, const Tensor<T>& input,
                                bool training);

  const ModelConfig& config() const { return cfg_; }
  ParamStore<T>& store() { return store_; }
  const ParamStore<T>& store() const { return store_; }
  // Undefined tensor when lcn_enabled is false.
  Tensor<T> lcn_weight() const { return lcn_.w; }

  std::uint64_t las_fingerprint = 0;

 private:
  void check_input(const Tensor<T>& input) const;

  ModelConfig cfg_;
  ParamStore<T> store_;
  struct Level {
    ConvBnRelu<T> c1, c2;
  };
  std::vector<Level> enc_;
  Level bottleneck_;
  struct Up {
    ConvBnRelu<T> up;  // after bilinear upsampling
    Level dec;
  };
  std::vector<Up> dec_;  // deepest first
  LcnLayer<T> lcn_;
  Conv2dLayer<T> conv_head_;
};

// Calibrated probabilistic forecast in field units.
struct ForecastDistribution {
  GeoGrid mu;
  GeoGrid sigma;
};

// Runs both nets in inference mode on one sample and destandardizes the
// outputs. Rejects nets trained against different standardization maps.
template <typename T>
ForecastDistribution calibrated_forecast(BiasNet<T>& bias, SpreadNet<T>& spread,
                                         const EnsembleSample& sample,
                                         const LasMaps& las);

// Mean over filter entries of the variance across gridpoints; the quantity
// the adjacent-difference penalty drives toward zero.
template <typename T>
double lcn_spatial_variance(const Tensor<T>& w);

}  // namespace enspost::nn
