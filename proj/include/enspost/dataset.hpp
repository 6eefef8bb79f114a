#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

#include "enspost/grid.hpp"
#include "enspost/preprocess.hpp"
#include "enspost/tensor.hpp"

// One forecast date: ensemble members at three lead times plus the verifying
// truth, with derived per-lead statistics; and the disk layout (one GRD1
// file per date plus a JSON manifest) tying dates into train/val/test splits.

namespace enspost {

inline constexpr std::array<int, 3> kLeadHours{0, 24, 48};

struct EnsembleSample {
  int date_index = 0;
  std::array<std::vector<GeoGrid>, 3> members;  // per lead time
  std::array<GeoGrid, 3> mean, spread;          // all members, sample std
  GeoGrid ground_truth;                         // valid at the 48 h lead

  // Fills mean/spread from members. Requires >= 2 members per lead and
  // consistent dims.
  void finalize();

  // Statistics over the first n members only.
  GeoGrid reduced_mean(int lead_idx, int n) const;
  GeoGrid reduced_spread(int lead_idx, int n) const;
};

struct DatasetSplits {
  std::vector<std::string> train, val, test;  // file names, manifest-relative
};

struct DatasetManifest {
  int grid_h = 0, grid_w = 0;
  int n_members = 0, n_dates = 0;
  std::uint64_t seed = 0;
  DatasetSplits splits;
  std::filesystem::path dir;  // directory of the manifest, not serialized
};

// Contiguous date split by fractions (train takes the floor, test the rest).
DatasetSplits split_contiguous(const std::vector<std::string>& files,
                               double train_frac, double val_frac);

void save_manifest(const std::filesystem::path& path, const DatasetManifest& m);
DatasetManifest load_manifest(const std::filesystem::path& path);

// Per-date GRD1 layout: n_members channels at lead 0 h, then 24 h, then
// 48 h, then the truth channel; JSON sidecar describes every channel.
void write_sample(const std::filesystem::path& dir, const std::string& name,
                  const EnsembleSample& s);
EnsembleSample load_sample(const std::filesystem::path& path);
std::vector<EnsembleSample> load_split(const DatasetManifest& m,
                                       const std::string& split);

// Standardized spread inputs are floored here: with few members the sample
// std can land arbitrarily close to zero, which would blow up anything that
// divides by a predicted spread.
inline constexpr double kSpreadChannelFloor = 0.05;

inline constexpr int channels_per_lead(int n) { return 2 + n; }
inline constexpr int mean_channel(int lead_idx, int n) {
  return lead_idx * channels_per_lead(n);
}
inline constexpr int spread_channel(int lead_idx, int n) {
  return lead_idx * channels_per_lead(n) + 1;
}
inline constexpr int member_channel(int lead_idx, int m, int n) {
  return lead_idx * channels_per_lead(n) + 2 + m;
}

template <typename T>
struct Batch {
  nn::Tensor<T> input;         // (B, 3*(2+n), H, W), standardized
  nn::Tensor<T> spread_label;  // (B, 1, H, W), full-ensemble 48 h spread / std_map
  nn::Tensor<T> truth_std;     // (B, 1, H, W), standardized ground truth
  std::vector<int> date_indices;
  // Raw copies for scoring in physical units.
  std::vector<GeoGrid> raw_mean48, raw_spread48, raw_truth;
};

template <typename T>
Batch<T> assemble_batch(const std::vector<const EnsembleSample*>& samples,
                        const LasMaps& maps, int n_input_members,
                        double spread_floor = kSpreadChannelFloor) {
  if (samples.empty()) throw std::invalid_argument("assemble_batch: no samples");
  if (n_input_members < 2)
    throw std::invalid_argument("assemble_batch: need at least 2 members");
  const int n = n_input_members;
  const int hh = maps.mean_map().h, ww = maps.mean_map().w;
  const int c = 3 * channels_per_lead(n);
  const auto b = static_cast<std::int64_t>(samples.size());

  Batch<T> out;
  out.input = nn::Tensor<T>::zeros({b, c, hh, ww});
  out.spread_label = nn::Tensor<T>::zeros({b, 1, hh, ww});
  out.truth_std = nn::Tensor<T>::zeros({b, 1, hh, ww});

  auto put = [&](nn::Tensor<T>& t, std::int64_t bi, std::int64_t ci,
                 const GeoGrid& g) {
    T* dst = t.values().data() +
             (bi * t.shape().c + ci) * static_cast<std::int64_t>(hh) * ww;
    for (std::size_t i = 0; i < g.size(); ++i)
      dst[i] = static_cast<T>(g.values[i]);
  };

  for (std::int64_t bi = 0; bi < b; ++bi) {
    const EnsembleSample& s = *samples[bi];
    for (int l = 0; l < 3; ++l) {
      if (static_cast<int>(s.members[l].size()) < n)
        throw std::invalid_argument("assemble_batch: not enough members at lead " +
                                    std::to_string(kLeadHours[l]));
      GeoGrid mean_std = maps.standardize(s.reduced_mean(l, n));
      GeoGrid spread_std = maps.scale_only(s.reduced_spread(l, n));
      for (double& v : spread_std.values) v = std::max(v, spread_floor);
      put(out.input, bi, mean_channel(l, n), mean_std);
      put(out.input, bi, spread_channel(l, n), spread_std);
      for (int m = 0; m < n; ++m)
        put(out.input, bi, member_channel(l, m, n),
            maps.standardize(s.members[l][m]));
    }
    // Labels: the full-ensemble 48 h spread is what the spread net learns to
    // predict from the reduced ensemble; it is scaled but not floored.
    put(out.spread_label, bi, 0, maps.scale_only(s.spread[2]));
    put(out.truth_std, bi, 0, maps.standardize(s.ground_truth));
    out.date_indices.push_back(s.date_index);
    out.raw_mean48.push_back(s.reduced_mean(2, n));
    out.raw_spread48.push_back(s.reduced_spread(2, n));
    out.raw_truth.push_back(s.ground_truth);
  }
  return out;
}

}  // namespace enspost
