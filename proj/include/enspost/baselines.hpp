#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "enspost/dataset.hpp"
#include "enspost/grid.hpp"
#include "enspost/train.hpp"

// Non-neural reference predictors: per-gridpoint linear regression on the
// 48 h member values, and the global 8-parameter EMOS Gaussian regression
// trained on closed-form CRPS gradients.

namespace enspost::baselines {

enum class LinTarget { mean, spread };

const char* lin_target_name(LinTarget t);
LinTarget lin_target_from_name(const std::string& s);

// Independent affine fit per gridpoint: n member weights plus an intercept,
// stored as n+1 coefficient maps (weights first, intercept last).
struct LinRegModel {
  int h = 0, w = 0;
  int n_members = 0;
  LinTarget target = LinTarget::mean;
  std::vector<GeoGrid> coef;  // n_members + 1 maps

  // Affine combination of the first n_members grids.
  GeoGrid predict(const std::vector<GeoGrid>& members) const;
  GeoGrid predict(const EnsembleSample& s) const;  // 48 h members
};

// Ordinary least squares via per-gridpoint normal equations, solved in
// 64-bit by Cholesky. A singular system falls back to a small ridge
// (lambda = 1e-6 on the diagonal) when allowed, otherwise throws naming the
// gridpoint. Requires at least n_members + 2 samples.
LinRegModel linreg_fit(const std::vector<const EnsembleSample*>& samples,
                       LinTarget target, int n_members,
                       bool ridge_fallback = true);

inline constexpr double kLinRegRidge = 1e-6;

// Coefficient maps as a GRD1 stack (float32) plus a JSON sidecar with the
// target and member count.
void save_linreg(const std::filesystem::path& path, const LinRegModel& m);
LinRegModel load_linreg(const std::filesystem::path& path);

// EMOS: mu = a + sum_i b_i x_i over the first five members,
// sigma^2 = c^2 + d^2 S^2 with S^2 the 5-member sample variance. Exactly
// eight global scalars; sigma stays positive for every parameter vector.
struct EmosModel {
  double a = 0.0;
  std::array<double, 5> b{0.2, 0.2, 0.2, 0.2, 0.2};
  double c = 0.1;
  double d = 1.0;

  void predict_point(const double* members, double* mu, double* sigma) const;
  // Per-gridpoint Gaussian parameters from the 48 h members, field units.
  void predict(const EnsembleSample& s, GeoGrid* mu, GeoGrid* sigma) const;

  std::string to_json() const;
  static EmosModel from_json(const std::string& text);
};

void save_emos(const std::filesystem::path& path, const EmosModel& m);
EmosModel load_emos(const std::filesystem::path& path);

// One date of pooled gridpoint regression points.
struct EmosDate {
  std::vector<std::array<double, 5>> x;
  std::vector<double> y;
};

// Minibatch Adam on the mean closed-form CRPS, with the same shuffle,
// early-stopping and evaluation cadence as the network trainer (batch_size
// counts dates). Returns the best-validation parameters; a non-finite loss
// ends the run with the last good parameters instead of throwing. Only
// cfg.loss == crps is meaningful and enforced.
EmosModel emos_fit(const std::vector<EmosDate>& train_set,
                   const std::vector<EmosDate>& val_set,
                   const train::TrainConfig& cfg,
                   train::TrainResult* result = nullptr);

// Pools every gridpoint of each sample's 48 h members against the truth.
std::vector<EmosDate> emos_dates(
    const std::vector<const EnsembleSample*>& samples);

}  // namespace enspost::baselines
