#include "enspost/models.hpp"

#include <cmath>
#include <string>

namespace enspost::nn {

std::string head_name(Head h) {
  switch (h) {
    case Head::spread:
      return "spread";
    case Head::bias:
      return "bias";
    case Head::crps:
      return "crps";
  }
  throw std::invalid_argument("unknown head");
}

Head head_from_name(const std::string& s) {
  if (s == "spread") return Head::spread;
  if (s == "bias") return Head::bias;
  if (s == "crps") return Head::crps;
  throw std::invalid_argument("unknown head name: " + s);
}

void ModelConfig::validate() const {
  if (grid_h < 1 || grid_w < 1)
    throw std::invalid_argument("model config: grid dims must be positive");
  if (n_input_members < 2)
    throw std::invalid_argument("model config: need at least 2 input members");
  if (base_filters < 2 || base_filters % 2 != 0)
    throw std::invalid_argument("model config: base_filters must be even and >= 2");
  if (n_inception_blocks < 1)
    throw std::invalid_argument("model config: need at least 1 block");
  for (int d : dilation_rates)
    if (d < 1) throw std::invalid_argument("model config: dilation must be >= 1");
  if (unet_levels < 0 || unet_levels > 3)
    throw std::invalid_argument("model config: unet_levels must be in 0..3");
  const int div = 1 << unet_levels;
  if (grid_h % div != 0 || grid_w % div != 0)
    throw std::invalid_argument(
        "model config: grid " + std::to_string(grid_h) + "x" +
        std::to_string(grid_w) + " not divisible by 2^" +
        std::to_string(unet_levels) +
        "; pad the grid to a multiple of " + std::to_string(div) +
        " or lower unet_levels");
  if (mix_lr_gain <= 0.0)
    throw std::invalid_argument("model config: mix_lr_gain must be positive");
}

nlohmann::json ModelConfig::to_json() const {
  return nlohmann::json{{"grid_h", grid_h},
                        {"grid_w", grid_w},
                        {"n_input_members", n_input_members},
                        {"base_filters", base_filters},
                        {"n_inception_blocks", n_inception_blocks},
                        {"dilation_rates", dilation_rates},
                        {"unet_levels", unet_levels},
                        {"lcn_enabled", lcn_enabled},
                        {"l1_adjacent_weight", l1_adjacent_weight},
                        {"wrap_longitude", wrap_longitude},
                        {"head", head_name(head)},
                        {"mix_lr_gain", mix_lr_gain}};
}

ModelConfig ModelConfig::from_json(const nlohmann::json& j) {
  ModelConfig cfg;
  cfg.grid_h = j.at("grid_h").get<int>();
  cfg.grid_w = j.at("grid_w").get<int>();
  cfg.n_input_members = j.at("n_input_members").get<int>();
  cfg.base_filters = j.at("base_filters").get<int>();
  cfg.n_inception_blocks = j.at("n_inception_blocks").get<int>();
  cfg.dilation_rates = j.at("dilation_rates").get<std::array<int, 3>>();
  cfg.unet_levels = j.at("unet_levels").get<int>();
  cfg.lcn_enabled = j.at("lcn_enabled").get<bool>();
  cfg.l1_adjacent_weight = j.at("l1_adjacent_weight").get<double>();
  cfg.wrap_longitude = j.at("wrap_longitude").get<bool>();
  cfg.head = head_from_name(j.at("head").get<std::string>());
  cfg.mix_lr_gain = j.at("mix_lr_gain").get<double>();
  cfg.validate();
  return cfg;
}

// ------------------------------------------------------------- SpreadNet

template <typename T>
SpreadNet<T>::SpreadNet(const ModelConfig& cfg, std::uint64_t seed)
    : cfg_(cfg), store_(seed) {
  cfg_.validate();
  const PadSpec::Mode mode = cfg_.pad_mode();
  const int bf = cfg_.base_filters;
  const int half = bf / 2;
  const int enc_in = 3 * (1 + cfg_.n_input_members);
  enc1_ = make_cbr(store_, "enc1", enc_in, kEncodedChannels, 1, 1, mode);
  enc2_ = make_cbr(store_, "enc2", kEncodedChannels, kEncodedChannels, 1, 1,
                   mode);
  const int ctx_ch = kEncodedChannels + 3;
  stem_ = make_conv(store_, "stem", ctx_ch, bf, 1, 1, mode,
                    Init::trunc_normal);
  blocks_.reserve(static_cast<std::size_t>(cfg_.n_inception_blocks));
  for (int b = 0; b < cfg_.n_inception_blocks; ++b) {
    Block blk;
    const std::string pre = "block" + std::to_string(b) + ".";
    for (int i = 0; i < 3; ++i) {
      blk.reduce[static_cast<std::size_t>(i)] =
          make_cbr(store_, pre + "reduce" + std::to_string(i), bf + ctx_ch,
                   half, 1, 1, mode);
      blk.dilated[static_cast<std::size_t>(i)] =
          make_cbr(store_, pre + "dilated" + std::to_string(i), half, half, 3,
                   cfg_.dilation_rates[static_cast<std::size_t>(i)], mode);
    }
    blk.proj = make_conv(store_, pre + "proj", 3 * half, bf, 1, 1, mode,
                         Init::trunc_normal);
    blocks_.push_back(std::move(blk));
  }
  // Zero head: sigma_nn starts at softplus(0) everywhere, and with the mix
  // weight at kMixInit the output starts at the input spread.
  head_ = make_conv(store_, "head", bf, 1, 1, 1, mode, Init::zeros);
  w_ = store_.param("mix_w", {1, 1, cfg_.grid_h, cfg_.grid_w}, Init::constant,
                    T(kMixInit), cfg_.mix_lr_gain);
}

template <typename T>
void SpreadNet<T>::check_input(const Tensor<T>& input) const {
  const Shape4& s = input.shape();
  if (s.c != cfg_.channels())
    throw std::invalid_argument(
        "spread net: input has " + std::to_string(s.c) + " channels, config (" +
        std::to_string(cfg_.n_input_members) + " members) requires " +
        std::to_string(cfg_.channels()));
  if (s.h != cfg_.grid_h || s.w != cfg_.grid_w)
    throw std::invalid_argument("spread net: input grid " + std::to_string(s.h) +
                                "x" + std::to_string(s.w) + " != config " +
                                std::to_string(cfg_.grid_h) + "x" +
                                std::to_string(cfg_.grid_w));
}

template <typename T>
Tensor<T> SpreadNet<T>::context(Graph<T>* g, const Tensor<T>& input,
                                bool training) {
  check_input(input);
  const int n = cfg_.n_input_members;
  std::vector<Tensor<T>> feats;
  for (int l = 0; l < 3; ++l) {
    feats.push_back(narrow_channels(g, input, mean_channel(l, n), 1));
    feats.push_back(narrow_channels(g, input, member_channel(l, 0, n), n));
  }
  Tensor<T> enc = enc2_.forward(
      g, enc1_.forward(g, concat_channels(g, feats), training), training);
  std::vector<Tensor<T>> ctx{enc};
  for (int l = 0; l < 3; ++l)
    ctx.push_back(narrow_channels(g, input, spread_channel(l, n), 1));
  return concat_channels(g, ctx);
}

template <typename T>
Tensor<T> SpreadNet<T>::stem(Graph<T>* g, const Tensor<T>& input,
                             bool training) {
  return stem_.forward(g, context(g, input, training));
}

template <typename T>
Tensor<T> SpreadNet<T>::trunk_of(Graph<T>* g, const Tensor<T>& ctx,
                                 bool training) {
  Tensor<T> t = stem_.forward(g, ctx);
  for (Block& blk : blocks_) {
    Tensor<T> in = concat_channels(g, {t, ctx});
    std::vector<Tensor<T>> branches;
    branches.reserve(3);
    for (std::size_t i = 0; i < 3; ++i)
      branches.push_back(blk.dilated[i].forward(
          g, blk.reduce[i].forward(g, in, training), training));
    t = add(g, t, blk.proj.forward(g, concat_channels(g, branches)));
  }
  return t;
}

template <typename T>
Tensor<T> SpreadNet<T>::trunk(Graph<T>* g, const Tensor<T>& input,
                              bool training) {
  return trunk_of(g, context(g, input, training), training);
}

template <typename T>
Tensor<T> SpreadNet<T>::forward(Graph<T>* g, const Tensor<T>& input,
                                bool training) {
  check_input(input);
  Tensor<T> t = trunk_of(g, context(g, input, training), training);
  Tensor<T> sig_nn =
      add_scalar(g, softplus(g, head_.forward(g, t)), T(kSigmaFloor));
  Tensor<T> s = sigmoid(g, w_);
  Tensor<T> one_minus_s = add_scalar(g, mul_scalar(g, s, T(-1)), T(1));
  Tensor<T> sig_in = narrow_channels(
      g, input, spread_channel(2, cfg_.n_input_members), 1);
  return add(g, mul(g, s, sig_nn), mul(g, one_minus_s, sig_in));
}

// --------------------------------------------------------------- BiasNet

template <typename T>
BiasNet<T>::BiasNet(const ModelConfig& cfg, std::uint64_t seed)
    : cfg_(cfg), store_(seed) {
  cfg_.validate();
  const PadSpec::Mode mode = cfg_.pad_mode();
  const int levels = cfg_.unet_levels;
  int head_in = cfg_.channels();
  if (levels >= 1) {
    int cin = cfg_.channels();
    for (int i = 0; i < levels; ++i) {
      const int w = kUnetBaseWidth << i;
      const std::string pre = "down" + std::to_string(i) + ".";
      enc_.push_back(Level{make_cbr(store_, pre + "c1", cin, w, 3, 1, mode),
                           make_cbr(store_, pre + "c2", w, w, 3, 1, mode)});
      cin = w;
    }
    const int bw = kUnetBaseWidth << levels;
    bottleneck_ =
        Level{make_cbr(store_, "bottleneck.c1", cin, bw, 3, 1, mode),
              make_cbr(store_, "bottleneck.c2", bw, bw, 3, 1, mode)};
    int cur = bw;
    for (int i = levels - 1; i >= 0; --i) {
      const int w = kUnetBaseWidth << i;
      const std::string pre = "up" + std::to_string(i) + ".";
      Up u;
      u.up = make_cbr(store_, pre + "conv", cur, w, 3, 1, mode);
      u.dec = Level{make_cbr(store_, pre + "c1", 2 * w, w, 3, 1, mode),
                    make_cbr(store_, pre + "c2", w, w, 3, 1, mode)};
      dec_.push_back(std::move(u));
      cur = w;
    }
    head_in = kUnetBaseWidth;
  }
  // Zero head either way: the untrained correction is exactly zero.
  if (cfg_.lcn_enabled) {
    lcn_.w = store_.param("lcn.w", {1, head_in, cfg_.grid_h, cfg_.grid_w},
                          Init::zeros);
    lcn_.b = store_.param("lcn.b", {1, 1, cfg_.grid_h, cfg_.grid_w},
                          Init::zeros);
  } else {
    conv_head_ = make_conv(store_, "head", head_in, 1, 1, 1, mode, Init::zeros);
  }
}

template <typename T>
void BiasNet<T>::check_input(const Tensor<T>& input) const {
  const Shape4& s = input.shape();
  if (s.c != cfg_.channels())
    throw std::invalid_argument(
        "bias net: input has " + std::to_string(s.c) + " channels, config (" +
        std::to_string(cfg_.n_input_members) + " members) requires " +
        std::to_string(cfg_.channels()));
  if (s.h != cfg_.grid_h || s.w != cfg_.grid_w)
    throw std::invalid_argument("bias net: input grid " + std::to_string(s.h) +
                                "x" + std::to_string(s.w) + " != config " +
                                std::to_string(cfg_.grid_h) + "x" +
                                std::to_string(cfg_.grid_w));
}

template <typename T>
Tensor<T> BiasNet<T>::bottleneck_features(Graph<T>* g, const Tensor<T>& input,
                                          bool training) {
  check_input(input);
  if (cfg_.unet_levels < 1)
    throw std::invalid_argument("bias net: no bottleneck with unet_levels=0");
  Tensor<T> f = input;
  for (Level& lv : enc_)
    f = max_pool_2x2(g, lv.c2.forward(g, lv.c1.forward(g, f, training),
                                      training));
  return bottleneck_.c2.forward(
      g, bottleneck_.c1.forward(g, f, training), training);
}

template <typename T>
Tensor<T> BiasNet<T>::forward(Graph<T>* g, const Tensor<T>& input,
                              bool training) {
  check_input(input);
  Tensor<T> f = input;
  if (cfg_.unet_levels >= 1) {
    std::vector<Tensor<T>> skips;
    skips.reserve(enc_.size());
    for (Level& lv : enc_) {
      f = lv.c2.forward(g, lv.c1.forward(g, f, training), training);
      skips.push_back(f);
      f = max_pool_2x2(g, f);
    }
    f = bottleneck_.c2.forward(g, bottleneck_.c1.forward(g, f, training),
                               training);
    for (std::size_t i = 0; i < dec_.size(); ++i) {
      Up& u = dec_[i];
      f = u.up.forward(g, bilinear_upsample_2x(g, f), training);
      f = concat_channels(g, {f, skips[skips.size() - 1 - i]});
      f = u.dec.c2.forward(g, u.dec.c1.forward(g, f, training), training);
    }
  }
  return cfg_.lcn_enabled ? lcn_.forward(g, f) : conv_head_.forward(g, f);
}

template <typename T>
Tensor<T> BiasNet<T>::corrected_mean(Graph<T>* g, const Tensor<T>& input,
                                     bool training) {
  Tensor<T> mean48 =
      narrow_channels(g, input, mean_channel(2, cfg_.n_input_members), 1);
  return add(g, mean48, forward(g, input, training));
}

// ---------------------------------------------------------- composition

template <typename T>
ForecastDistribution calibrated_forecast(BiasNet<T>& bias, SpreadNet<T>& spread,
                                         const EnsembleSample& sample,
                                         const LasMaps& las) {
  const ModelConfig& bc = bias.config();
  const ModelConfig& sc = spread.config();
  if (bc.grid_h != sc.grid_h || bc.grid_w != sc.grid_w ||
      bc.n_input_members != sc.n_input_members)
    throw std::invalid_argument(
        "calibrated_forecast: bias and spread configs disagree on grid or "
        "member count");
  const std::uint64_t fp = las.fingerprint();
  if (bias.las_fingerprint != 0 && spread.las_fingerprint != 0 &&
      bias.las_fingerprint != spread.las_fingerprint)
    throw std::invalid_argument(
        "calibrated_forecast: nets were trained against different "
        "standardization maps");
  for (std::uint64_t have : {bias.las_fingerprint, spread.las_fingerprint})
    if (have != 0 && have != fp)
      throw std::invalid_argument(
          "calibrated_forecast: supplied standardization maps do not match "
          "the maps the nets were trained with");

  Batch<T> batch =
      assemble_batch<T>({&sample}, las, bc.n_input_members);
  Tensor<T> mu_std = bias.corrected_mean(nullptr, batch.input, false);
  Tensor<T> sig_std = spread.forward(nullptr, batch.input, false);

  const GeoGrid& proto = sample.ground_truth;
  GeoGrid mu_grid(proto.h, proto.w);
  mu_grid.field_id = proto.field_id;
  mu_grid.units = proto.units;
  GeoGrid sig_grid = mu_grid;
  for (int i = 0; i < proto.h; ++i)
    for (int j = 0; j < proto.w; ++j) {
      mu_grid.at(i, j) = static_cast<double>(mu_std.at(0, 0, i, j));
      sig_grid.at(i, j) = static_cast<double>(sig_std.at(0, 0, i, j));
    }
  return ForecastDistribution{las.destandardize(mu_grid),
                              las.unscale(sig_grid)};
}

template <typename T>
double lcn_spatial_variance(const Tensor<T>& w) {
  const Shape4& s = w.shape();
  const std::int64_t hw = s.h * s.w;
  if (hw == 0 || s.c == 0) return 0.0;
  double acc = 0.0;
  for (std::int64_t n = 0; n < s.n; ++n)
    for (std::int64_t c = 0; c < s.c; ++c) {
      double mean = 0.0;
      for (std::int64_t i = 0; i < s.h; ++i)
        for (std::int64_t j = 0; j < s.w; ++j)
          mean += static_cast<double>(w.at(n, c, i, j));
      mean /= static_cast<double>(hw);
      double var = 0.0;
      for (std::int64_t i = 0; i < s.h; ++i)
        for (std::int64_t j = 0; j < s.w; ++j) {
          const double d = static_cast<double>(w.at(n, c, i, j)) - mean;
          var += d * d;
        }
      acc += var / static_cast<double>(hw);
    }
  return acc / static_cast<double>(s.n * s.c);
}

#define ENSPOST_INSTANTIATE_MODELS(T)                                        \
  template class SpreadNet<T>;                                               \
  template class BiasNet<T>;                                                 \
  template ForecastDistribution calibrated_forecast<T>(                      \
      BiasNet<T>&, SpreadNet<T>&, const EnsembleSample&, const LasMaps&);    \
  template double lcn_spatial_variance<T>(const Tensor<T>&);

ENSPOST_INSTANTIATE_MODELS(float)
ENSPOST_INSTANTIATE_MODELS(double)

#undef ENSPOST_INSTANTIATE_MODELS

}  // namespace enspost::nn
