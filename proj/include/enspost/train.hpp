#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <limits>
#include <string>
#include <vector>

#include "enspost/dataset.hpp"
#include "enspost/models.hpp"
#include "enspost/preprocess.hpp"
#include "enspost/tensor.hpp"

// Adam, loss assembly and the training loop shared by both networks and the
// EMOS baseline. Everything is deterministic given (seed, config, dataset):
// shuffling draws from a counter-based stream, evaluation order is fixed,
// and there is no threading.

namespace enspost::train {

enum class Loss { mse, neg_ssim, crps };

const char* loss_name(Loss l);
Loss loss_from_name(const std::string& s);

// Step budgets. The desk values are sized for small grids; the paper-scale
// values are kept as presets.
inline constexpr int kDeskSpreadSteps = 1500;
inline constexpr int kDeskBiasSteps = 5000;
inline constexpr int kPaperSpreadSteps = 4725;
inline constexpr int kPaperBiasSteps = 25000;

struct TrainConfig {
  Loss loss = Loss::mse;
  double lr = 1e-3;
  int batch_size = 2;
  int max_steps = kDeskSpreadSteps;
  double l2_weight = 1e-5;         // on conv/LCN weight tensors only
  double l1_adjacent_weight = 0.0; // on the LCN weights, if the model has them
  int early_stop_patience = 10;    // evaluations without a new best
  std::uint64_t seed = 2024;
  int eval_every = 100;            // steps between validation passes

  void validate() const;
  std::string to_json() const;
  static TrainConfig from_json(const std::string& text);
};

// Samples from N(0, std^2) with values outside +-2 std redrawn.
// Deterministic given the seed.
template <typename T>
nn::Tensor<T> init_truncated_normal(nn::Shape4 shape, double stddev,
                                    std::uint64_t seed);

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

// Bias-corrected Adam over a parameter store. Per-entry lr_gain scales the
// step size (the spread net's mixing weight trains with a large gain).
// step() consumes the accumulated gradients; the caller zeroes them.
template <typename T>
class Adam {
 public:
  Adam(nn::ParamStore<T>* store, AdamConfig cfg);

  // Throws on a non-finite gradient, naming the parameter.
  void step();
  std::int64_t t() const { return t_; }

 private:
  nn::ParamStore<T>* store_;
  AdamConfig cfg_;
  std::int64_t t_ = 0;
  std::vector<std::vector<T>> m_, v_;
};

// Patience counter over validation losses. observe() returns true when the
// value is a strict improvement; should_stop() fires after `patience`
// consecutive non-improving observations.
class EarlyStopper {
 public:
  explicit EarlyStopper(int patience);

  bool observe(int step, double val_loss);
  bool should_stop() const { return since_best_ >= patience_; }
  int best_step() const { return best_step_; }
  double best_value() const { return best_; }

 private:
  int patience_;
  int since_best_ = 0;
  int best_step_ = 0;
  double best_ = std::numeric_limits<double>::infinity();
};

struct HistoryRow {
  int step = 0;
  double train_loss = 0.0;
  double val_loss = 0.0;
};

void write_history_csv(const std::filesystem::path& path,
                       const std::vector<HistoryRow>& rows);

struct TrainResult {
  int steps_run = 0;
  int best_step = 0;
  double best_val_loss = std::numeric_limits<double>::infinity();
  std::vector<HistoryRow> history;  // row 0 is the pre-training loss
};

// Scalar data loss for one batch, recorded on g when g is non-null.
template <typename T>
using BatchLossFn =
    std::function<nn::Tensor<T>(nn::Graph<T>*, const Batch<T>&, bool)>;

template <typename T>
struct TrainJob {
  nn::ParamStore<T>* store = nullptr;
  BatchLossFn<T> data_loss;
  nn::Tensor<T> lcn_weight;  // undefined when the model has no LCN head
};

// Core loop: shuffled minibatches, Adam, periodic validation, early
// stopping, best-checkpoint restore. The model behind `job` ends up holding
// the best-validation parameters. Total loss = data loss
// + l2_weight * sum of squared conv/LCN weights
// + l1_adjacent_weight * adjacency penalty on the LCN weights.
// Validation applies the same total loss on the validation split in eval
// mode. Throws on empty splits and non-finite losses.
template <typename T>
TrainResult run_training(const TrainJob<T>& job,
                         const std::vector<const EnsembleSample*>& train_set,
                         const std::vector<const EnsembleSample*>& val_set,
                         const LasMaps& maps, int n_input_members,
                         const TrainConfig& cfg);

// The three recipes. Each stamps the model with the LAS fingerprint of the
// maps it standardized with.
//
// Bias: corrected 48 h mean against the standardized truth (mse or
// neg_ssim).
template <typename T>
TrainResult train_bias(nn::BiasNet<T>& net,
                       const std::vector<const EnsembleSample*>& train_set,
                       const std::vector<const EnsembleSample*>& val_set,
                       const LasMaps& maps, const TrainConfig& cfg);

// Spread: predicted spread against the full-ensemble 48 h spread label (mse
// or neg_ssim).
template <typename T>
TrainResult train_spread(nn::SpreadNet<T>& net,
                         const std::vector<const EnsembleSample*>& train_set,
                         const std::vector<const EnsembleSample*>& val_set,
                         const LasMaps& maps, const TrainConfig& cfg);

// Calibration: Gaussian CRPS of (frozen bias-corrected mean, trainable
// spread) against the standardized truth. Requires loss == crps and a bias
// net standardized with the same maps.
template <typename T>
TrainResult train_crps(nn::SpreadNet<T>& net, nn::BiasNet<T>& frozen_bias,
                       const std::vector<const EnsembleSample*>& train_set,
                       const std::vector<const EnsembleSample*>& val_set,
                       const LasMaps& maps, const TrainConfig& cfg);

std::vector<const EnsembleSample*> sample_ptrs(
    const std::vector<EnsembleSample>& samples);

}  // namespace enspost::train
