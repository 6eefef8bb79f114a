#include "enspost/preprocess.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <stdexcept>

namespace enspost {

namespace {

// Window sums of per-cell totals accumulated over `count` fields, turned
// into pooled mean/std over count * k * k samples per window.
MovingStats window_stats(const std::vector<double>& sum,
                         const std::vector<double>& sum_sq, int h, int w,
                         int k, long long count) {
  if (k < 1 || k % 2 == 0)
    throw std::invalid_argument("moving window: k must be odd and positive");
  if (k > h || k > w)
    throw std::invalid_argument("moving window: window does not fit grid");
  int oh = h - k + 1, ow = w - k + 1;

  // Inclusive 2-D prefix sums with a zero border row/col.
  std::vector<double> p1(static_cast<std::size_t>(h + 1) * (w + 1), 0.0);
  std::vector<double> p2(p1.size(), 0.0);
  for (int i = 0; i < h; ++i)
    for (int j = 0; j < w; ++j) {
      std::size_t o = static_cast<std::size_t>(i + 1) * (w + 1) + (j + 1);
      std::size_t s = static_cast<std::size_t>(i) * w + j;
      p1[o] = sum[s] + p1[o - 1] + p1[o - (w + 1)] - p1[o - (w + 1) - 1];
      p2[o] = sum_sq[s] + p2[o - 1] + p2[o - (w + 1)] - p2[o - (w + 1) - 1];
    }
  auto win = [&](const std::vector<double>& p, int i, int j) {
    std::size_t r0 = static_cast<std::size_t>(i) * (w + 1);
    std::size_t r1 = static_cast<std::size_t>(i + k) * (w + 1);
    return p[r1 + j + k] - p[r1 + j] - p[r0 + j + k] + p[r0 + j];
  };

  MovingStats out{GeoGrid(oh, ow), GeoGrid(oh, ow)};
  double n = static_cast<double>(count) * k * k;
  for (int i = 0; i < oh; ++i)
    for (int j = 0; j < ow; ++j) {
      double m = win(p1, i, j) / n;
      double v = win(p2, i, j) / n - m * m;
      out.mean.at(i, j) = m;
      out.std.at(i, j) = std::sqrt(std::max(v, 0.0));
    }
  return out;
}

void write_f64(std::ostream& os, double v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof v);
}
double read_f64(std::istream& is) {
  double v;
  is.read(reinterpret_cast<char*>(&v), sizeof v);
  return v;
}
void write_u32(std::ostream& os, std::uint32_t v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof v);
}
std::uint32_t read_u32(std::istream& is) {
  std::uint32_t v;
  is.read(reinterpret_cast<char*>(&v), sizeof v);
  return v;
}

constexpr char kLasMagic[8] = {'E', 'N', 'S', 'L', 'A', 'S', '1', '\0'};

}  // namespace

MovingStats moving_stats(const GeoGrid& f, int k) {
  std::vector<double> sq(f.size());
  for (std::size_t i = 0; i < f.size(); ++i) sq[i] = f.values[i] * f.values[i];
  MovingStats out = window_stats(f.values, sq, f.h, f.w, k, 1);
  out.mean.field_id = f.field_id;
  out.std.field_id = f.field_id;
  return out;
}

GeoGrid pad_geo(const GeoGrid& f, int target_h, int target_w) {
  if (target_h < f.h || target_w < f.w)
    throw std::invalid_argument("pad_geo: target smaller than input");
  int pt = (target_h - f.h) / 2;  // leftover goes to the high side
  int pl = (target_w - f.w) / 2;
  GeoGrid out(target_h, target_w);
  out.field_id = f.field_id;
  out.units = f.units;
  for (int i = 0; i < target_h; ++i) {
    int si = std::min(std::max(i - pt, 0), f.h - 1);  // latitude: replicate
    for (int j = 0; j < target_w; ++j) {
      int sj = (j - pl) % f.w;  // longitude: wrap
      if (sj < 0) sj += f.w;
      out.at(i, j) = f.at(si, sj);
    }
  }
  return out;
}

GeoGrid gaussian_smooth(const GeoGrid& f, double sigma, double truncate) {
  if (!(sigma > 0.0)) throw std::invalid_argument("gaussian_smooth: sigma <= 0");
  int r = static_cast<int>(std::ceil(truncate * sigma));
  std::vector<double> kern(2 * r + 1);
  double total = 0.0;
  for (int i = -r; i <= r; ++i) {
    kern[i + r] = std::exp(-0.5 * (i * i) / (sigma * sigma));
    total += kern[i + r];
  }
  for (double& v : kern) v /= total;

  GeoGrid tmp(f.h, f.w), out(f.h, f.w);
  out.field_id = f.field_id;
  out.units = f.units;
  // Longitude pass, wrap indexing.
  for (int i = 0; i < f.h; ++i)
    for (int j = 0; j < f.w; ++j) {
      double acc = 0.0;
      for (int o = -r; o <= r; ++o) {
        int sj = (j + o) % f.w;
        if (sj < 0) sj += f.w;
        acc += kern[o + r] * f.at(i, sj);
      }
      tmp.at(i, j) = acc;
    }
  // Latitude pass, edge replicate.
  for (int i = 0; i < f.h; ++i)
    for (int j = 0; j < f.w; ++j) {
      double acc = 0.0;
      for (int o = -r; o <= r; ++o) {
        int si = std::min(std::max(i + o, 0), f.h - 1);
        acc += kern[o + r] * tmp.at(si, j);
      }
      out.at(i, j) = acc;
    }
  return out;
}

void LasMaps::Fitter::add(const GeoGrid& f) {
  if (count_ == 0) {
    h_ = f.h;
    w_ = f.w;
    sum_.assign(f.size(), 0.0);
    sum_sq_.assign(f.size(), 0.0);
  } else if (f.h != h_ || f.w != w_) {
    throw std::invalid_argument("LasMaps::Fitter: field dims changed");
  }
  for (std::size_t i = 0; i < f.size(); ++i) {
    sum_[i] += f.values[i];
    sum_sq_[i] += f.values[i] * f.values[i];
  }
  ++count_;
}

LasMaps LasMaps::Fitter::finish(const LasConfig& cfg) const {
  if (count_ == 0) throw std::logic_error("LasMaps::Fitter: no fields added");
  LasMaps maps;
  maps.cfg_ = cfg;
  if (cfg.global_stats) {
    double t1 = 0.0, t2 = 0.0;
    for (std::size_t i = 0; i < sum_.size(); ++i) {
      t1 += sum_[i];
      t2 += sum_sq_[i];
    }
    double n = static_cast<double>(count_) * h_ * w_;
    double m = t1 / n;
    double sd = std::sqrt(std::max(t2 / n - m * m, 0.0));
    maps.mean_ = GeoGrid(h_, w_, m);
    maps.std_ = GeoGrid(h_, w_, std::max(sd, cfg.eps));
    return maps;
  }
  MovingStats ms = window_stats(sum_, sum_sq_, h_, w_, cfg.window, count_);
  maps.mean_ = gaussian_smooth(pad_geo(ms.mean, h_, w_), cfg.sigma, cfg.truncate);
  maps.std_ = gaussian_smooth(pad_geo(ms.std, h_, w_), cfg.sigma, cfg.truncate);
  for (double& s : maps.std_.values) s = std::max(s, cfg.eps);
  return maps;
}

LasMaps LasMaps::fit(const std::vector<const GeoGrid*>& fields,
                     const LasConfig& cfg) {
  Fitter fitter;
  for (const GeoGrid* f : fields) fitter.add(*f);
  return fitter.finish(cfg);
}

GeoGrid LasMaps::standardize(const GeoGrid& f) const {
  if (!f.same_dims(mean_)) throw std::invalid_argument("standardize: dims mismatch");
  GeoGrid out = f;
  for (std::size_t i = 0; i < out.size(); ++i)
    out.values[i] = (out.values[i] - mean_.values[i]) / std_.values[i];
  return out;
}

GeoGrid LasMaps::destandardize(const GeoGrid& f) const {
  if (!f.same_dims(mean_)) throw std::invalid_argument("destandardize: dims mismatch");
  GeoGrid out = f;
  for (std::size_t i = 0; i < out.size(); ++i)
    out.values[i] = out.values[i] * std_.values[i] + mean_.values[i];
  return out;
}

GeoGrid LasMaps::scale_only(const GeoGrid& f) const {
  if (!f.same_dims(std_)) throw std::invalid_argument("scale_only: dims mismatch");
  GeoGrid out = f;
  for (std::size_t i = 0; i < out.size(); ++i) out.values[i] /= std_.values[i];
  return out;
}

GeoGrid LasMaps::unscale(const GeoGrid& f) const {
  if (!f.same_dims(std_)) throw std::invalid_argument("unscale: dims mismatch");
  GeoGrid out = f;
  for (std::size_t i = 0; i < out.size(); ++i) out.values[i] *= std_.values[i];
  return out;
}

std::uint64_t LasMaps::fingerprint() const {
  std::vector<unsigned char> buf;
  auto put = [&buf](const void* p, std::size_t n) {
    const auto* b = static_cast<const unsigned char*>(p);
    buf.insert(buf.end(), b, b + n);
  };
  const std::int64_t h = mean_.h, w = mean_.w;
  put(&h, sizeof h);
  put(&w, sizeof w);
  put(&cfg_.window, sizeof cfg_.window);
  put(&cfg_.sigma, sizeof cfg_.sigma);
  put(&cfg_.truncate, sizeof cfg_.truncate);
  put(&cfg_.eps, sizeof cfg_.eps);
  const int g = cfg_.global_stats ? 1 : 0;
  put(&g, sizeof g);
  put(mean_.values.data(), mean_.values.size() * sizeof(double));
  put(std_.values.data(), std_.values.size() * sizeof(double));
  return fnv1a_bytes(buf.data(), buf.size());
}

void LasMaps::save(const std::filesystem::path& path) const {
  static_assert(std::endian::native == std::endian::little);
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("LasMaps::save: cannot open " + path.string());
  os.write(kLasMagic, 8);
  write_u32(os, static_cast<std::uint32_t>(mean_.h));
  write_u32(os, static_cast<std::uint32_t>(mean_.w));
  write_u32(os, static_cast<std::uint32_t>(cfg_.window));
  write_u32(os, cfg_.global_stats ? 1u : 0u);
  write_f64(os, cfg_.sigma);
  write_f64(os, cfg_.truncate);
  write_f64(os, cfg_.eps);
  for (double v : mean_.values) write_f64(os, v);
  for (double v : std_.values) write_f64(os, v);
  if (!os) throw std::runtime_error("LasMaps::save: write failed");
}

LasMaps LasMaps::load(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("LasMaps::load: cannot open " + path.string());
  char magic[8];
  is.read(magic, 8);
  if (!is || std::memcmp(magic, kLasMagic, 8) != 0)
    throw std::runtime_error("LasMaps::load: bad magic in " + path.string());
  LasMaps maps;
  int h = static_cast<int>(read_u32(is));
  int w = static_cast<int>(read_u32(is));
  maps.cfg_.window = static_cast<int>(read_u32(is));
  maps.cfg_.global_stats = read_u32(is) != 0;
  maps.cfg_.sigma = read_f64(is);
  maps.cfg_.truncate = read_f64(is);
  maps.cfg_.eps = read_f64(is);
  maps.mean_ = GeoGrid(h, w);
  maps.std_ = GeoGrid(h, w);
  for (double& v : maps.mean_.values) v = read_f64(is);
  for (double& v : maps.std_.values) v = read_f64(is);
  if (!is) throw std::runtime_error("LasMaps::load: truncated " + path.string());
  return maps;
}

}  // namespace enspost
