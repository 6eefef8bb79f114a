#include "enspost/heatmap.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <stdexcept>

namespace enspost {

namespace {

struct Rgb {
  double r, g, b;
};

constexpr Rgb kNeg{33.0, 102.0, 172.0};
constexpr Rgb kMid{247.0, 247.0, 247.0};
constexpr Rgb kPos{178.0, 24.0, 43.0};

Rgb lerp(const Rgb& a, const Rgb& b, double t) {
  return {a.r + (b.r - a.r) * t, a.g + (b.g - a.g) * t,
          a.b + (b.b - a.b) * t};
}

}  // namespace

void write_heatmap_ppm(const std::filesystem::path& path, const GeoGrid& g,
                       const HeatmapOptions& opt) {
  if (g.size() == 0)
    throw std::invalid_argument("write_heatmap_ppm: empty grid");
  if (opt.scale < 1)
    throw std::invalid_argument("write_heatmap_ppm: scale must be >= 1");
  double limit = opt.limit;
  if (limit <= 0.0) {
    for (double v : g.values) limit = std::max(limit, std::abs(v));
    if (limit == 0.0) limit = 1.0;
  }

  const int ph = g.h * opt.scale, pw = g.w * opt.scale;
  std::ofstream os(path, std::ios::binary);
  if (!os)
    throw std::runtime_error("write_heatmap_ppm: cannot open " +
                             path.string());
  os << "P6\n" << pw << ' ' << ph << "\n255\n";
  std::vector<unsigned char> row(static_cast<std::size_t>(pw) * 3);
  for (int pi = 0; pi < ph; ++pi) {
    const int i = pi / opt.scale;
    for (int pj = 0; pj < pw; ++pj) {
      const int j = pj / opt.scale;
      double t = std::clamp(g.at(i, j) / limit, -1.0, 1.0);
      Rgb c = t < 0.0 ? lerp(kMid, kNeg, -t) : lerp(kMid, kPos, t);
      row[static_cast<std::size_t>(pj) * 3 + 0] =
          static_cast<unsigned char>(std::lround(c.r));
      row[static_cast<std::size_t>(pj) * 3 + 1] =
          static_cast<unsigned char>(std::lround(c.g));
      row[static_cast<std::size_t>(pj) * 3 + 2] =
          static_cast<unsigned char>(std::lround(c.b));
    }
    os.write(reinterpret_cast<const char*>(row.data()),
             static_cast<std::streamsize>(row.size()));
  }
  if (!os) throw std::runtime_error("write_heatmap_ppm: write failed");
}

}  // namespace enspost
