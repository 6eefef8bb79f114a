#pragma once

#include <filesystem>
#include <vector>

#include "enspost/grid.hpp"

// Local-area standardization: per-gridpoint mean/std maps fitted from
// training fields with a moving window, padded back to grid dims and
// smoothed, so nearby points share similar scaling.

namespace enspost {

struct MovingStats {
  GeoGrid mean, std;  // dims (h - k + 1, w - k + 1), population std
};

// k-by-k moving window mean and std over a single field. Throws if k < 1 or
// the window does not fit.
MovingStats moving_stats(const GeoGrid& f, int k = 7);

// Pads to target dims: latitude (rows) replicates edge rows, longitude
// (cols) wraps cyclically. Odd leftover padding goes to the high side.
GeoGrid pad_geo(const GeoGrid& f, int target_h, int target_w);

// Separable Gaussian blur, truncated at truncate*sigma. Longitude wraps,
// latitude replicates edges. Kernel normalized to sum 1 per pass.
GeoGrid gaussian_smooth(const GeoGrid& f, double sigma = 10.0,
                        double truncate = 4.0);

struct LasConfig {
  int window = 7;
  double sigma = 10.0;
  double truncate = 4.0;
  double eps = 1e-3;          // lower bound on std maps
  bool global_stats = false;  // constant maps from pooled scalar stats
};

class LasMaps {
 public:
  // Streaming fit: add every training field (all members, all lead times),
  // then finish once.
  class Fitter {
   public:
    void add(const GeoGrid& f);
    LasMaps finish(const LasConfig& cfg) const;

   private:
    int h_ = 0, w_ = 0;
    long long count_ = 0;
    std::vector<double> sum_, sum_sq_;
  };

  static LasMaps fit(const std::vector<const GeoGrid*>& fields,
                     const LasConfig& cfg);

  GeoGrid standardize(const GeoGrid& f) const;    // (f - mean) / std
  GeoGrid destandardize(const GeoGrid& f) const;  // f * std + mean
  GeoGrid scale_only(const GeoGrid& f) const;     // f / std, for spread-like fields
  GeoGrid unscale(const GeoGrid& f) const;        // f * std

  const GeoGrid& mean_map() const { return mean_; }
  const GeoGrid& std_map() const { return std_; }
  const LasConfig& config() const { return cfg_; }

  // FNV-1a over dims, config and both maps; identifies the exact
  // standardization a model was trained with.
  std::uint64_t fingerprint() const;

  void save(const std::filesystem::path& path) const;
  static LasMaps load(const std::filesystem::path& path);

 private:
  GeoGrid mean_, std_;
  LasConfig cfg_;
};

}  // namespace enspost
