#include "enspost/synthdata.hpp"

#include <cmath>
#include <complex>
#include <numbers>
#include <stdexcept>

#include "enspost/fft.hpp"
#include "enspost/rng.hpp"

namespace enspost {

namespace {

using cd = std::complex<double>;

// Spectral workspace on the 2H x W torus. The latitude axis is doubled so
// cropping the top half leaves a non-periodic-looking dimension, while
// longitude stays genuinely periodic.
struct Spectral {
  int h2, w;
  std::vector<double> amp;      // per-mode amplitude, unit field variance
  std::vector<double> freq_x;   // signed longitudinal frequency per column

  explicit Spectral(const SynthConfig& cfg) : h2(2 * cfg.grid_h), w(cfg.grid_w) {
    amp.resize(static_cast<std::size_t>(h2) * w);
    freq_x.resize(w);
    for (int kx = 0; kx < w; ++kx)
      freq_x[kx] = (kx <= w / 2) ? kx : kx - w;
    double sum_sq = 0.0;
    for (int ky = 0; ky < h2; ++ky) {
      double fy = (ky <= h2 / 2) ? ky : ky - h2;
      for (int kx = 0; kx < w; ++kx) {
        double k = std::hypot(fy, freq_x[kx]);
        double a = (k > 0.0) ? std::pow(k, cfg.spectral_slope / 2.0) : 0.0;
        amp[static_cast<std::size_t>(ky) * w + kx] = a;
        sum_sq += a * a;
      }
    }
    // Var(Re ifft) = sum(amp^2) / N^2 for unit complex-Gaussian modes, so
    // scale amplitudes to make the synthesized field unit variance.
    double n = static_cast<double>(h2) * w;
    double scale = n / std::sqrt(sum_sq);
    for (double& a : amp) a *= scale;
  }

  std::vector<cd> draw(rng::Stream& stream) const {
    std::vector<cd> c(amp.size());
    for (std::size_t i = 0; i < amp.size(); ++i) {
      double g1 = stream.next_gaussian();
      double g2 = stream.next_gaussian();
      c[i] = amp[i] * cd(g1, g2);
    }
    return c;
  }

  // Longitudinal advection by v gridpoints as a spectral phase shift;
  // fractional speeds are exact.
  void advect(std::vector<cd>& c, double v) const {
    for (int kx = 0; kx < w; ++kx) {
      double ang = -2.0 * std::numbers::pi * freq_x[kx] * v / w;
      cd ph(std::cos(ang), std::sin(ang));
      for (int ky = 0; ky < h2; ++ky)
        c[static_cast<std::size_t>(ky) * w + kx] *= ph;
    }
  }

  // Real field on the cropped H x W grid.
  GeoGrid realize(std::vector<cd> c, int crop_h) const {
    fft::inverse_2d(c.data(), static_cast<std::size_t>(h2), static_cast<std::size_t>(w));
    GeoGrid g(crop_h, w);
    for (int i = 0; i < crop_h; ++i)
      for (int j = 0; j < w; ++j)
        g.at(i, j) = c[static_cast<std::size_t>(i) * w + j].real();
    return g;
  }
};

struct TruthChain {
  Spectral spec;
  std::vector<std::vector<cd>> states;  // spectral state per date

  TruthChain(const SynthConfig& cfg) : spec(cfg) {
    rng::Stream stream(rng::derive_key(cfg.seed, "truth"));
    int n_states = cfg.n_dates + 2;
    states.reserve(n_states);
    states.push_back(spec.draw(stream));
    double blend = std::sqrt(1.0 - cfg.innovation_rho * cfg.innovation_rho);
    for (int t = 1; t < n_states; ++t) {
      std::vector<cd> c = states.back();
      spec.advect(c, cfg.advection_speed);
      std::vector<cd> innov = spec.draw(stream);
      for (std::size_t i = 0; i < c.size(); ++i)
        c[i] = cfg.innovation_rho * c[i] + blend * innov[i];
      states.push_back(std::move(c));
    }
  }
};

}  // namespace

void SynthConfig::validate() const {
  if (!fft::is_pow2(static_cast<std::size_t>(grid_h)) ||
      !fft::is_pow2(static_cast<std::size_t>(grid_w)))
    throw std::invalid_argument("SynthConfig: grid dims must be powers of two");
  if (n_dates < 1) throw std::invalid_argument("SynthConfig: n_dates < 1");
  if (n_members < 2) throw std::invalid_argument("SynthConfig: n_members < 2");
  if (!(noise_growth[0] <= noise_growth[1] && noise_growth[1] <= noise_growth[2]))
    throw std::invalid_argument("SynthConfig: noise must grow with lead time");
  if (!(innovation_rho >= 0.0 && innovation_rho <= 1.0))
    throw std::invalid_argument("SynthConfig: innovation_rho outside [0,1]");
  double total = split_fractions[0] + split_fractions[1] + split_fractions[2];
  if (std::abs(total - 1.0) > 1e-9)
    throw std::invalid_argument("SynthConfig: split fractions must sum to 1");
  if (season_period <= 0.0)
    throw std::invalid_argument("SynthConfig: season_period <= 0");
}

double SynthConfig::season(int date) const {
  return 1.0 + season_amplitude *
                   std::sin(2.0 * std::numbers::pi * date / season_period);
}

std::vector<GeoGrid> generate_truth(const SynthConfig& cfg) {
  cfg.validate();
  TruthChain chain(cfg);
  std::vector<GeoGrid> grids;
  grids.reserve(chain.states.size());
  for (const auto& c : chain.states)
    grids.push_back(chain.spec.realize(c, cfg.grid_h));

  double s1 = 0.0, s2 = 0.0;
  long long n = 0;
  for (const GeoGrid& g : grids)
    for (double v : g.values) {
      s1 += v;
      s2 += v * v;
      ++n;
    }
  double mean = s1 / n;
  double sd = std::sqrt(std::max(s2 / n - mean * mean, 1e-30));
  for (GeoGrid& g : grids)
    for (double& v : g.values) v = (v - mean) / sd;
  return grids;
}

SynthDataset generate_dataset(const SynthConfig& cfg) {
  cfg.validate();
  TruthChain chain(cfg);
  const Spectral& spec = chain.spec;

  // Standardization constants of the truth sequence, applied identically to
  // every field derived from the same spectral states.
  double s1 = 0.0, s2 = 0.0;
  long long n = 0;
  std::vector<GeoGrid> truth;
  truth.reserve(chain.states.size());
  for (const auto& c : chain.states) {
    truth.push_back(spec.realize(c, cfg.grid_h));
    for (double v : truth.back().values) {
      s1 += v;
      s2 += v * v;
      ++n;
    }
  }
  double mean = s1 / n;
  double sd = std::sqrt(std::max(s2 / n - mean * mean, 1e-30));
  auto standardize = [&](GeoGrid& g) {
    for (double& v : g.values) v = (v - mean) / sd;
  };
  for (GeoGrid& g : truth) standardize(g);

  SynthDataset ds;
  ds.cfg = cfg;

  {
    rng::Stream bias_stream(rng::derive_key(cfg.seed, "bias_field"));
    ds.bias_field = spec.realize(spec.draw(bias_stream), cfg.grid_h);
    for (double& v : ds.bias_field.values) v *= cfg.bias_field_amplitude;
  }

  ds.samples.reserve(cfg.n_dates);
  for (int d = 0; d < cfg.n_dates; ++d) {
    EnsembleSample s;
    s.date_index = d;
    double season = cfg.season(d);
    for (int m = 0; m < cfg.n_members; ++m) {
      rng::Stream speed_stream(
          rng::derive_key(cfg.seed, "member_speed", static_cast<std::uint64_t>(d),
                          static_cast<std::uint64_t>(m)));
      double dv = cfg.speed_jitter * speed_stream.next_gaussian();
      for (int l = 0; l < 3; ++l) {
        std::vector<cd> c = chain.states[d];
        spec.advect(c, l * (cfg.advection_speed + dv));
        GeoGrid field = spec.realize(std::move(c), cfg.grid_h);
        standardize(field);
        double sigma = cfg.noise_growth[l];
        if (sigma > 0.0) {
          rng::Stream noise_stream(rng::derive_key(
              cfg.seed, "member_noise",
              static_cast<std::uint64_t>(d) * 3 + static_cast<std::uint64_t>(l),
              static_cast<std::uint64_t>(m)));
          GeoGrid noise = spec.realize(spec.draw(noise_stream), cfg.grid_h);
          for (std::size_t i = 0; i < field.size(); ++i)
            field.values[i] += season * sigma * noise.values[i];
        }
        if (cfg.bias_field_amplitude != 0.0)
          for (std::size_t i = 0; i < field.size(); ++i)
            field.values[i] += season * ds.bias_field.values[i];
        s.members[l].push_back(std::move(field));
      }
    }
    s.ground_truth = truth[d + 2];
    s.finalize();
    ds.samples.push_back(std::move(s));
  }
  return ds;
}

DatasetManifest write_dataset(const SynthDataset& ds,
                              const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  std::vector<std::string> files;
  files.reserve(ds.samples.size());
  char name[32];
  for (const EnsembleSample& s : ds.samples) {
    std::snprintf(name, sizeof(name), "date_%04d.grd", s.date_index);
    write_sample(dir, name, s);
    files.emplace_back(name);
  }

  DatasetManifest m;
  m.grid_h = ds.cfg.grid_h;
  m.grid_w = ds.cfg.grid_w;
  m.n_members = ds.cfg.n_members;
  m.n_dates = ds.cfg.n_dates;
  m.seed = ds.cfg.seed;
  m.splits = split_contiguous(files, ds.cfg.split_fractions[0],
                              ds.cfg.split_fractions[1]);
  m.dir = dir;
  save_manifest(dir / "manifest.json", m);

  // Generating-bias oracle: on disk for post-hoc checks, deliberately absent
  // from the manifest so no loader can feed it to a model.
  Grd1 bias;
  bias.h = static_cast<std::uint32_t>(ds.bias_field.h);
  bias.w = static_cast<std::uint32_t>(ds.bias_field.w);
  bias.c = 1;
  bias.data.assign(ds.bias_field.size(), 0.0f);
  grd1_set_channel(bias, 0, ds.bias_field);
  grd1_write(dir / "bias_field.grd", bias);
  return m;
}

}  // namespace enspost
