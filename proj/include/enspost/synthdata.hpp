#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <vector>

#include "enspost/dataset.hpp"
#include "enspost/grid.hpp"

// Seeded synthetic dataset: a smooth "truth" field advected in longitude
// with AR(1) innovations, and ensemble members that advect the initial state
// with perturbed speeds plus correlated noise and a hidden static bias.
// Everything is a pure function of (seed, config).

namespace enspost {

struct SynthConfig {
  std::uint64_t seed = 2024;
  int grid_h = 32, grid_w = 64;  // powers of two (spectral synthesis)
  int n_dates = 400;
  int n_members = 10;
  double spectral_slope = -3.0;   // amplitude ~ k^(slope/2)
  double advection_speed = 1.5;   // gridpoints per 24 h step, may be fractional
  double speed_jitter = 0.35;     // per-member, per-date advection speed std
  std::array<double, 3> noise_growth{0.1, 0.25, 0.45};  // member noise std per lead
  double bias_field_amplitude = 0.3;  // hidden systematic error, all members
  double innovation_rho = 0.97;       // AR(1) memory of the truth evolution
  double season_amplitude = 0.3;      // slow modulation of bias and noise
  double season_period = 100.0;       // dates per cycle
  std::array<double, 3> split_fractions{0.7, 0.15, 0.15};

  void validate() const;
  double season(int date) const;
};

struct SynthDataset {
  SynthConfig cfg;
  std::vector<EnsembleSample> samples;
  GeoGrid bias_field;  // generating oracle; never fed to models
};

// Standardized truth sequence of length n_dates + 2 (each forecast date
// needs the state two steps ahead as its verifying truth).
std::vector<GeoGrid> generate_truth(const SynthConfig& cfg);

SynthDataset generate_dataset(const SynthConfig& cfg);

// Writes one GRD1 per date plus sidecars, the dataset manifest
// (manifest.json), and the hidden bias field as bias_field.grd outside the
// manifest. Returns the manifest.
DatasetManifest write_dataset(const SynthDataset& ds,
                              const std::filesystem::path& dir);

}  // namespace enspost
