#pragma once

#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "enspost/dataset.hpp"
#include "enspost/grid.hpp"
#include "enspost/metrics.hpp"
#include "enspost/preprocess.hpp"

// Model-identity grammar and the scoring pass behind `eval` and `compare`.
// An identity names what gets scored and which artifacts it needs:
//
//   E{n}        raw ensemble, first n members     (empirical CRPS)
//   B{n}        bias-corrected mean               (RMSE only)
//   U{n}        predicted spread                  (spread RMSE only)
//   B{n}U{n}C   calibrated Gaussian forecast      (closed-form CRPS)
//   Lin{n}      gridpoint-wise linear regression  (RMSE only)
//   EMOS{n}     global Gaussian regression, n = 5 (closed-form CRPS)

namespace enspost::eval {

struct ModelId {
  enum class Kind { ensemble, bias, spread, calibrated, linreg, emos };
  Kind kind = Kind::ensemble;
  int n_members = 0;
  std::string text;  // canonical spelling, e.g. "B5U5C"
};

// One-line grammar summary, embedded in parse errors so a bad --model flag
// is self-explaining.
std::string model_grammar();

// Throws std::invalid_argument (message includes model_grammar()) on
// anything the grammar does not produce, including B3U5C with mismatched
// counts and EMOS with n != 5.
ModelId parse_model_id(const std::string& s);

// Canonical artifact filename(s) for a trained model, relative to the
// models directory. Calibrated ids also need their B{n} checkpoint.
std::string artifact_name(const ModelId& id);

// Per-row weights for scoring means: cos(latitude) with rows spanning
// 90..-90 degrees at centers (i + 0.5) * 180 / h - 90, or all-ones.
std::vector<double> latitude_weights(int h, bool area_weighted);

// Half-open index box [y0, y1) x [x0, x1); name is the canonical
// "y0:y1,x0:x1" spelling ("global" for the full grid).
struct Region {
  int y0 = 0, y1 = 0, x0 = 0, x1 = 0;
  std::string name;
};
Region global_region(int h, int w);
Region parse_region(const std::string& s, int h, int w);

// What one model produces for one date, in physical field units. Empty
// grids mark components the model does not predict; `members` non-empty
// means the forecast is a raw ensemble scored with the empirical CRPS;
// `gaussian_crps` marks sigma as a calibrated stddev scored in closed form.
struct DateForecast {
  GeoGrid mu;
  GeoGrid sigma;
  std::vector<GeoGrid> members;
  bool gaussian_crps = false;
};

using ForecastFn = std::function<DateForecast(const EnsembleSample&)>;

struct EvalOptions {
  Region region;  // default-constructed => global
  bool area_weighted = false;
  // Score E{n} as N(mean, spread) instead of the empirical step CDF; spread
  // is floored at 1e-9 to keep the closed form defined.
  bool dressed_ensembles = false;
};

struct EvalResult {
  // Per-date rows followed by date_index == -1 aggregates, ready for
  // write_score_csv.
  std::vector<metrics::ScoreRow> rows;
  // Full-grid mean over dates of the per-gridpoint CRPS; empty when the
  // model has no CRPS. Region and weighting do not affect it.
  GeoGrid crps_map;
};

// Builds the forecast function for an id. `models_dir` is consulted only
// for ids with trained artifacts; `las` is required for net-backed ids.
// Missing artifacts throw std::runtime_error naming the expected path.
ForecastFn make_forecast_fn(const ModelId& id,
                            const std::filesystem::path& models_dir,
                            const LasMaps* las);

// Scores one model over a split. Emits per date: "crps" when the model
// defines a distribution, "rmse_mean" against the ground truth when mu is
// predicted, "rmse_spread" against the full-ensemble 48 h spread when sigma
// is predicted.
EvalResult evaluate_model(const ForecastFn& fn,
                          const std::vector<const EnsembleSample*>& split,
                          const EvalOptions& opt);

// Groups per-date rows by (region, metric) in first-appearance order and
// appends one date_index == -1 row per group: arithmetic mean over dates,
// except metrics named "rmse*" which pool as sqrt(mean of squares). Rows
// already aggregated are ignored. Deterministic, so re-reading a written
// CSV and re-aggregating reproduces the stored aggregate rows exactly.
std::vector<metrics::ScoreRow> aggregate_scores(
    const std::vector<metrics::ScoreRow>& per_date);

// The aggregate value for (region, metric); throws if absent.
double aggregate_value(const std::vector<metrics::ScoreRow>& rows,
                       const std::string& region, const std::string& metric);

}  // namespace enspost::eval
