#pragma once

#include <filesystem>

#include "enspost/grid.hpp"

// Renders a scalar grid to an uncompressed binary PPM (P6) with a symmetric
// diverging ramp: values are mapped by t = clamp(v / limit, -1, 1) where
// limit defaults to max |v|, then
//
//   t = -1 -> (33, 102, 172)   blue  (negative: second field wins)
//   t =  0 -> (247, 247, 247)  near-white
//   t = +1 -> (178, 24, 43)    red   (positive: first field wins)
//
// with linear interpolation on each half. A constant-zero grid renders
// all near-white. scale pixels per gridpoint (nearest neighbor) keeps small
// grids readable.

namespace enspost {

struct HeatmapOptions {
  double limit = 0.0;  // <= 0 means use max |v| (1.0 if the grid is zero)
  int scale = 8;
};

void write_heatmap_ppm(const std::filesystem::path& path, const GeoGrid& g,
                       const HeatmapOptions& opt = {});

}  // namespace enspost
