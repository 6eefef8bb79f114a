#include "enspost/train.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "enspost/graph.hpp"
#include "enspost/ops.hpp"
#include "enspost/rng.hpp"

namespace enspost::train {

using nlohmann::json;

const char* loss_name(Loss l) {
  switch (l) {
    case Loss::mse: return "mse";
    case Loss::neg_ssim: return "neg_ssim";
    case Loss::crps: return "crps";
  }
  throw std::logic_error("loss_name: bad enum");
}

Loss loss_from_name(const std::string& s) {
  if (s == "mse") return Loss::mse;
  if (s == "neg_ssim") return Loss::neg_ssim;
  if (s == "crps") return Loss::crps;
  throw std::invalid_argument("unknown loss '" + s +
                              "' (expected mse, neg_ssim or crps)");
}

void TrainConfig::validate() const {
  if (!(lr > 0.0)) throw std::invalid_argument("TrainConfig: lr must be > 0");
  if (batch_size < 1)
    throw std::invalid_argument("TrainConfig: batch_size must be >= 1");
  if (max_steps < 1)
    throw std::invalid_argument("TrainConfig: max_steps must be >= 1");
  if (early_stop_patience < 1)
    throw std::invalid_argument("TrainConfig: patience must be >= 1");
  if (eval_every < 1)
    throw std::invalid_argument("TrainConfig: eval_every must be >= 1");
  if (l2_weight < 0.0 || l1_adjacent_weight < 0.0)
    throw std::invalid_argument("TrainConfig: negative regularizer weight");
}

std::string TrainConfig::to_json() const {
  json j;
  j["loss"] = loss_name(loss);
  j["lr"] = lr;
  j["batch_size"] = batch_size;
  j["max_steps"] = max_steps;
  j["l2_weight"] = l2_weight;
  j["l1_adjacent_weight"] = l1_adjacent_weight;
  j["early_stop_patience"] = early_stop_patience;
  j["seed"] = seed;
  j["eval_every"] = eval_every;
  return j.dump(2);
}

TrainConfig TrainConfig::from_json(const std::string& text) {
  json j = json::parse(text);
  TrainConfig c;
  c.loss = loss_from_name(j.at("loss").get<std::string>());
  c.lr = j.at("lr").get<double>();
  c.batch_size = j.at("batch_size").get<int>();
  c.max_steps = j.at("max_steps").get<int>();
  c.l2_weight = j.at("l2_weight").get<double>();
  c.l1_adjacent_weight = j.at("l1_adjacent_weight").get<double>();
  c.early_stop_patience = j.at("early_stop_patience").get<int>();
  c.seed = j.at("seed").get<std::uint64_t>();
  c.eval_every = j.at("eval_every").get<int>();
  c.validate();
  return c;
}

template <typename T>
nn::Tensor<T> init_truncated_normal(nn::Shape4 shape, double stddev,
                                    std::uint64_t seed) {
  if (!(stddev > 0.0))
    throw std::invalid_argument("init_truncated_normal: std must be > 0");
  nn::Tensor<T> t = nn::Tensor<T>::zeros(shape);
  rng::Stream s(rng::derive_key(seed, "init", 0));
  for (auto& v : t.values()) v = static_cast<T>(s.next_truncated(stddev));
  return t;
}

template <typename T>
Adam<T>::Adam(nn::ParamStore<T>* store, AdamConfig cfg)
    : store_(store), cfg_(cfg) {
  if (!store_) throw std::invalid_argument("Adam: null parameter store");
  for (const auto& e : store_->params()) {
    m_.emplace_back(e.tensor.size(), T(0));
    v_.emplace_back(e.tensor.size(), T(0));
  }
}

template <typename T>
void Adam<T>::step() {
  ++t_;
  const double b1t = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
  const double b2t = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
  auto& params = store_->params();
  for (std::size_t p = 0; p < params.size(); ++p) {
    const T* grad = params[p].tensor.grad().data();
    T* x = params[p].tensor.values().data();
    T* m = m_[p].data();
    T* v = v_[p].data();
    const double lr = cfg_.lr * params[p].lr_gain;
    const auto n = params[p].tensor.size();
    for (std::int64_t i = 0; i < n; ++i) {
      const double g = static_cast<double>(grad[i]);
      if (!std::isfinite(g))
        throw std::runtime_error("adam_step: non-finite gradient in " +
                                 params[p].name);
      const double mi = cfg_.beta1 * static_cast<double>(m[i]) +
                        (1.0 - cfg_.beta1) * g;
      const double vi = cfg_.beta2 * static_cast<double>(v[i]) +
                        (1.0 - cfg_.beta2) * g * g;
      m[i] = static_cast<T>(mi);
      v[i] = static_cast<T>(vi);
      const double mhat = mi / b1t;
      const double vhat = vi / b2t;
      x[i] = static_cast<T>(static_cast<double>(x[i]) -
                            lr * mhat / (std::sqrt(vhat) + cfg_.eps));
    }
  }
}

EarlyStopper::EarlyStopper(int patience) : patience_(patience) {
  if (patience < 1) throw std::invalid_argument("EarlyStopper: patience >= 1");
}

bool EarlyStopper::observe(int step, double val_loss) {
  if (val_loss < best_) {
    best_ = val_loss;
    best_step_ = step;
    since_best_ = 0;
    return true;
  }
  ++since_best_;
  return false;
}

void write_history_csv(const std::filesystem::path& path,
                       const std::vector<HistoryRow>& rows) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot write " + path.string());
  os << "step,train_loss,val_loss\n";
  os.precision(17);
  for (const auto& r : rows)
    os << r.step << ',' << r.train_loss << ',' << r.val_loss << '\n';
  if (!os) throw std::runtime_error("short write to " + path.string());
}

std::vector<const EnsembleSample*> sample_ptrs(
    const std::vector<EnsembleSample>& samples) {
  std::vector<const EnsembleSample*> out;
  out.reserve(samples.size());
  for (const auto& s : samples) out.push_back(&s);
  return out;
}

namespace {

bool is_weight_name(const std::string& name) {
  return name.size() >= 2 && name.compare(name.size() - 2, 2, ".w") == 0;
}

template <typename T>
struct Snapshot {
  std::vector<std::vector<T>> params, buffers;
};

template <typename T>
Snapshot<T> take_snapshot(const nn::ParamStore<T>& store) {
  Snapshot<T> s;
  for (const auto& e : store.params())
    s.params.emplace_back(e.tensor.values().begin(), e.tensor.values().end());
  for (const auto& b : store.buffers()) s.buffers.push_back(*b.data);
  return s;
}

template <typename T>
void restore_snapshot(nn::ParamStore<T>& store, const Snapshot<T>& s) {
  auto& params = store.params();
  for (std::size_t i = 0; i < params.size(); ++i)
    std::copy(s.params[i].begin(), s.params[i].end(),
              params[i].tensor.values().begin());
  auto& buffers = store.buffers();
  for (std::size_t i = 0; i < buffers.size(); ++i) *buffers[i].data = s.buffers[i];
}

std::vector<int> shuffled_indices(int n, std::uint64_t key) {
  std::vector<int> idx(static_cast<std::size_t>(n));
  std::iota(idx.begin(), idx.end(), 0);
  rng::Stream s(key);
  for (int i = n - 1; i > 0; --i) {
    const int j = static_cast<int>(s.next_u64() % static_cast<std::uint64_t>(i + 1));
    std::swap(idx[static_cast<std::size_t>(i)], idx[static_cast<std::size_t>(j)]);
  }
  return idx;
}

// mse or neg_ssim of a prediction against a same-shaped reference. SSIM
// constants follow the metric's reference defaults with L = the data range
// of the reference batch.
template <typename T>
nn::Tensor<T> fit_loss(nn::Graph<T>* g, const nn::Tensor<T>& pred,
                       const nn::Tensor<T>& label, Loss loss) {
  if (loss == Loss::mse) {
    nn::Tensor<T> diff = nn::sub(g, pred, label);
    return nn::mean_all(g, nn::mul(g, diff, diff));
  }
  const auto [lo, hi] =
      std::minmax_element(label.values().begin(), label.values().end());
  const double range = std::max(static_cast<double>(*hi - *lo), 1e-12);
  nn::SsimSpec spec;
  spec.c1 = (0.01 * range) * (0.01 * range);
  spec.c2 = (0.03 * range) * (0.03 * range);
  return nn::mul_scalar(g, nn::ssim(g, pred, label, spec), T(-1));
}

}  // namespace

template <typename T>
TrainResult run_training(const TrainJob<T>& job,
                         const std::vector<const EnsembleSample*>& train_set,
                         const std::vector<const EnsembleSample*>& val_set,
                         const LasMaps& maps, int n_input_members,
                         const TrainConfig& cfg) {
  cfg.validate();
  if (!job.store || !job.data_loss)
    throw std::invalid_argument("run_training: incomplete job");
  if (train_set.empty() || val_set.empty())
    throw std::invalid_argument("run_training: empty split");
  if (cfg.l1_adjacent_weight > 0.0 && !job.lcn_weight.defined())
    throw std::invalid_argument(
        "run_training: l1_adjacent_weight set but the model has no LCN head");

  nn::ParamStore<T>& store = *job.store;

  auto total_loss = [&](nn::Graph<T>* g, const Batch<T>& batch,
                        bool training) -> nn::Tensor<T> {
    nn::Tensor<T> loss = job.data_loss(g, batch, training);
    if (cfg.l2_weight > 0.0) {
      nn::Tensor<T> acc;
      for (const auto& e : store.params()) {
        if (!is_weight_name(e.name)) continue;
        nn::Tensor<T> sq = nn::sum_all(g, nn::mul(g, e.tensor, e.tensor));
        acc = acc.defined() ? nn::add(g, acc, sq) : sq;
      }
      if (acc.defined())
        loss = nn::add(g, loss, nn::mul_scalar(g, acc, T(cfg.l2_weight)));
    }
    if (cfg.l1_adjacent_weight > 0.0) {
      nn::Tensor<T> pen = nn::l1_adjacent_penalty(g, job.lcn_weight);
      loss = nn::add(g, loss, nn::mul_scalar(g, pen, T(cfg.l1_adjacent_weight)));
    }
    return loss;
  };

  auto chunked = [&](const std::vector<const EnsembleSample*>& set) {
    std::vector<std::vector<const EnsembleSample*>> chunks;
    for (std::size_t i = 0; i < set.size(); i += cfg.batch_size) {
      const auto end = std::min(set.size(), i + cfg.batch_size);
      chunks.emplace_back(set.begin() + static_cast<std::ptrdiff_t>(i),
                          set.begin() + static_cast<std::ptrdiff_t>(end));
    }
    return chunks;
  };

  // Validation batches are reused across evaluations; the training split is
  // only ever assembled per step.
  std::vector<Batch<T>> val_batches;
  for (const auto& chunk : chunked(val_set))
    val_batches.push_back(assemble_batch<T>(chunk, maps, n_input_members));

  auto eval_batches = [&](const std::vector<Batch<T>>& batches) {
    double sum = 0.0;
    std::size_t count = 0;
    for (const auto& b : batches) {
      const double v =
          static_cast<double>(total_loss(nullptr, b, false).item());
      sum += v * static_cast<double>(b.date_indices.size());
      count += b.date_indices.size();
    }
    return sum / static_cast<double>(count);
  };

  auto eval_train_split = [&]() {
    double sum = 0.0;
    std::size_t count = 0;
    for (const auto& chunk : chunked(train_set)) {
      Batch<T> b = assemble_batch<T>(chunk, maps, n_input_members);
      sum += static_cast<double>(total_loss(nullptr, b, false).item()) *
             static_cast<double>(chunk.size());
      count += chunk.size();
    }
    return sum / static_cast<double>(count);
  };

  TrainResult res;
  EarlyStopper stopper(cfg.early_stop_patience);

  const double val0 = eval_batches(val_batches);
  res.history.push_back({0, eval_train_split(), val0});
  stopper.observe(0, val0);
  Snapshot<T> best = take_snapshot(store);
  res.best_step = 0;

  Adam<T> adam(&store, AdamConfig{.lr = cfg.lr});

  std::vector<int> order;
  std::size_t cursor = 0;
  int epoch = 0;
  double run_sum = 0.0;
  int run_count = 0;
  int step = 0;
  while (step < cfg.max_steps) {
    if (cursor >= order.size()) {
      order = shuffled_indices(static_cast<int>(train_set.size()),
                               rng::derive_key(cfg.seed, "shuffle",
                                               static_cast<std::uint64_t>(epoch)));
      ++epoch;
      cursor = 0;
    }
    std::vector<const EnsembleSample*> pick;
    for (int i = 0; i < cfg.batch_size && cursor < order.size(); ++i, ++cursor)
      pick.push_back(train_set[static_cast<std::size_t>(order[cursor])]);
    Batch<T> batch = assemble_batch<T>(pick, maps, n_input_members);

    nn::Graph<T> g;
    nn::Tensor<T> loss = total_loss(&g, batch, true);
    const double lv = static_cast<double>(loss.item());
    if (!std::isfinite(lv))
      throw std::runtime_error("train: non-finite loss at step " +
                               std::to_string(step + 1));
    g.backward(loss);
    adam.step();
    store.zero_grad();
    ++step;
    run_sum += lv;
    ++run_count;

    if (step % cfg.eval_every == 0 || step == cfg.max_steps) {
      const double val = eval_batches(val_batches);
      res.history.push_back({step, run_sum / run_count, val});
      run_sum = 0.0;
      run_count = 0;
      if (stopper.observe(step, val)) {
        best = take_snapshot(store);
        res.best_step = step;
      }
      if (stopper.should_stop()) break;
    }
  }

  restore_snapshot(store, best);
  res.steps_run = step;
  res.best_val_loss = stopper.best_value();
  return res;
}

template <typename T>
TrainResult train_bias(nn::BiasNet<T>& net,
                       const std::vector<const EnsembleSample*>& train_set,
                       const std::vector<const EnsembleSample*>& val_set,
                       const LasMaps& maps, const TrainConfig& cfg) {
  if (cfg.loss == Loss::crps)
    throw std::invalid_argument(
        "train_bias: crps needs a spread net; use mse or neg_ssim");
  net.las_fingerprint = maps.fingerprint();
  TrainJob<T> job;
  job.store = &net.store();
  job.lcn_weight = net.lcn_weight();
  job.data_loss = [&net, loss = cfg.loss](nn::Graph<T>* g, const Batch<T>& b,
                                          bool training) {
    return fit_loss(g, net.corrected_mean(g, b.input, training), b.truth_std,
                    loss);
  };
  return run_training(job, train_set, val_set, maps,
                      net.config().n_input_members, cfg);
}

template <typename T>
TrainResult train_spread(nn::SpreadNet<T>& net,
                         const std::vector<const EnsembleSample*>& train_set,
                         const std::vector<const EnsembleSample*>& val_set,
                         const LasMaps& maps, const TrainConfig& cfg) {
  if (cfg.loss == Loss::crps)
    throw std::invalid_argument(
        "train_spread: crps needs a frozen bias net; use train_crps");
  net.las_fingerprint = maps.fingerprint();
  TrainJob<T> job;
  job.store = &net.store();
  job.data_loss = [&net, loss = cfg.loss](nn::Graph<T>* g, const Batch<T>& b,
                                          bool training) {
    return fit_loss(g, net.forward(g, b.input, training), b.spread_label, loss);
  };
  return run_training(job, train_set, val_set, maps,
                      net.config().n_input_members, cfg);
}

template <typename T>
TrainResult train_crps(nn::SpreadNet<T>& net, nn::BiasNet<T>& frozen_bias,
                       const std::vector<const EnsembleSample*>& train_set,
                       const std::vector<const EnsembleSample*>& val_set,
                       const LasMaps& maps, const TrainConfig& cfg) {
  if (cfg.loss != Loss::crps)
    throw std::invalid_argument("train_crps: loss must be crps");
  const nn::ModelConfig& sc = net.config();
  const nn::ModelConfig& bc = frozen_bias.config();
  if (sc.grid_h != bc.grid_h || sc.grid_w != bc.grid_w ||
      sc.n_input_members != bc.n_input_members)
    throw std::invalid_argument(
        "train_crps: spread and bias nets disagree on grid or member count");
  const std::uint64_t fp = maps.fingerprint();
  if (frozen_bias.las_fingerprint != 0 && frozen_bias.las_fingerprint != fp)
    throw std::invalid_argument(
        "train_crps: bias net was trained with different standardization maps");
  net.las_fingerprint = fp;
  TrainJob<T> job;
  job.store = &net.store();
  job.data_loss = [&net, &frozen_bias](nn::Graph<T>* g, const Batch<T>& b,
                                       bool training) {
    // The bias net stays off the graph: its output is a constant input to
    // the CRPS map, so no gradient reaches it.
    nn::Tensor<T> mu = frozen_bias.corrected_mean(nullptr, b.input, false);
    nn::Tensor<T> sigma = net.forward(g, b.input, training);
    return nn::mean_all(g, nn::crps_gaussian_map(g, mu, sigma, b.truth_std));
  };
  return run_training(job, train_set, val_set, maps, sc.n_input_members, cfg);
}

#define ENSPOST_INSTANTIATE_TRAIN(T)                                          \
  template nn::Tensor<T> init_truncated_normal<T>(nn::Shape4, double,         \
                                                  std::uint64_t);             \
  template class Adam<T>;                                                     \
  template TrainResult run_training<T>(                                       \
      const TrainJob<T>&, const std::vector<const EnsembleSample*>&,          \
      const std::vector<const EnsembleSample*>&, const LasMaps&, int,         \
      const TrainConfig&);                                                    \
  template TrainResult train_bias<T>(                                         \
      nn::BiasNet<T>&, const std::vector<const EnsembleSample*>&,                 \
      const std::vector<const EnsembleSample*>&, const LasMaps&,              \
      const TrainConfig&);                                                    \
  template TrainResult train_spread<T>(                                       \
      nn::SpreadNet<T>&, const std::vector<const EnsembleSample*>&,               \
      const std::vector<const EnsembleSample*>&, const LasMaps&,              \
      const TrainConfig&);                                                    \
  template TrainResult train_crps<T>(                                         \
      nn::SpreadNet<T>&, nn::BiasNet<T>&, const std::vector<const EnsembleSample*>&,  \
      const std::vector<const EnsembleSample*>&, const LasMaps&,              \
      const TrainConfig&)

ENSPOST_INSTANTIATE_TRAIN(float);
ENSPOST_INSTANTIATE_TRAIN(double);

#undef ENSPOST_INSTANTIATE_TRAIN

}  // namespace enspost::train
