#pragma once

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

// Geographic grids and the GRD1 on-disk container. Grid math runs in double;
// files store 32-bit floats. Width is the periodic (longitude) axis.

namespace enspost {

enum class FieldId { t850_like, z500_like, synthetic_k };

const char* field_id_name(FieldId id);
FieldId field_id_from(const std::string& name);

struct GeoGrid {
  int h = 0, w = 0;
  std::vector<double> values;  // row-major h*w
  FieldId field_id = FieldId::synthetic_k;
  std::string units = "1";

  GeoGrid() = default;
  GeoGrid(int h_, int w_, double fill = 0.0)
      : h(h_), w(w_), values(static_cast<std::size_t>(h_) * w_, fill) {}

  std::size_t size() const { return values.size(); }
  double& at(int i, int j) {
    return values[static_cast<std::size_t>(i) * w + j];
  }
  double at(int i, int j) const {
    return values[static_cast<std::size_t>(i) * w + j];
  }
  bool same_dims(const GeoGrid& o) const { return h == o.h && w == o.w; }
};

// Multi-channel grid container: magic "ENSGRD1\0", u32 height, u32 width,
// u32 channels, then little-endian f32 row-major per channel.
struct Grd1 {
  std::uint32_t h = 0, w = 0, c = 0;
  std::vector<float> data;  // c * h * w

  float* channel(std::uint32_t ci) {
    return data.data() + static_cast<std::size_t>(ci) * h * w;
  }
  const float* channel(std::uint32_t ci) const {
    return data.data() + static_cast<std::size_t>(ci) * h * w;
  }
};

void grd1_write(const std::filesystem::path& path, const Grd1& g);
Grd1 grd1_read(const std::filesystem::path& path);

GeoGrid grd1_channel_grid(const Grd1& g, std::uint32_t ci);
void grd1_set_channel(Grd1& g, std::uint32_t ci, const GeoGrid& grid);

// FNV-1a over a file's bytes; used by run manifests to pin inputs.
std::uint64_t fnv1a_file(const std::filesystem::path& path);
std::uint64_t fnv1a_bytes(const void* data, std::size_t n);

}  // namespace enspost
