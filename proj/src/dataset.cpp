#include "enspost/dataset.hpp"

#include <cmath>
#include <fstream>

#include <json.hpp>

namespace enspost {

using nlohmann::json;

namespace {

GeoGrid stats_over(const std::vector<GeoGrid>& members, int n, bool want_std) {
  if (n < 1 || n > static_cast<int>(members.size()))
    throw std::invalid_argument("ensemble stats: bad member count");
  const GeoGrid& first = members[0];
  GeoGrid out(first.h, first.w);
  out.field_id = first.field_id;
  out.units = first.units;
  for (std::size_t i = 0; i < out.size(); ++i) {
    double s1 = 0.0;
    for (int m = 0; m < n; ++m) s1 += members[m].values[i];
    double mean = s1 / n;
    if (!want_std) {
      out.values[i] = mean;
      continue;
    }
    if (n < 2) throw std::invalid_argument("ensemble spread: needs >= 2 members");
    double s2 = 0.0;
    for (int m = 0; m < n; ++m) {
      double d = members[m].values[i] - mean;
      s2 += d * d;
    }
    out.values[i] = std::sqrt(s2 / (n - 1));  // sample std
  }
  return out;
}

}  // namespace

void EnsembleSample::finalize() {
  for (int l = 0; l < 3; ++l) {
    if (members[l].size() < 2)
      throw std::invalid_argument("EnsembleSample: needs >= 2 members per lead");
    for (const GeoGrid& g : members[l])
      if (!g.same_dims(members[0][0]))
        throw std::invalid_argument("EnsembleSample: member dims differ");
    mean[l] = stats_over(members[l], static_cast<int>(members[l].size()), false);
    spread[l] = stats_over(members[l], static_cast<int>(members[l].size()), true);
  }
  if (!ground_truth.same_dims(members[0][0]))
    throw std::invalid_argument("EnsembleSample: truth dims differ");
}

GeoGrid EnsembleSample::reduced_mean(int lead_idx, int n) const {
  return stats_over(members.at(lead_idx), n, false);
}

GeoGrid EnsembleSample::reduced_spread(int lead_idx, int n) const {
  return stats_over(members.at(lead_idx), n, true);
}

DatasetSplits split_contiguous(const std::vector<std::string>& files,
                               double train_frac, double val_frac) {
  if (train_frac < 0 || val_frac < 0 || train_frac + val_frac > 1.0)
    throw std::invalid_argument("split_contiguous: bad fractions");
  std::size_t n = files.size();
  std::size_t n_train = static_cast<std::size_t>(std::floor(n * train_frac));
  std::size_t n_val = static_cast<std::size_t>(std::floor(n * val_frac));
  DatasetSplits s;
  s.train.assign(files.begin(), files.begin() + n_train);
  s.val.assign(files.begin() + n_train, files.begin() + n_train + n_val);
  s.test.assign(files.begin() + n_train + n_val, files.end());
  return s;
}

void save_manifest(const std::filesystem::path& path, const DatasetManifest& m) {
  json j;
  j["format"] = "enspost-dataset-1";
  j["grid"] = {{"h", m.grid_h}, {"w", m.grid_w}};
  j["n_members"] = m.n_members;
  j["n_dates"] = m.n_dates;
  j["seed"] = m.seed;
  j["leads_hours"] = kLeadHours;
  j["splits"] = {{"train", m.splits.train},
                 {"val", m.splits.val},
                 {"test", m.splits.test}};
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("save_manifest: cannot open " + path.string());
  os << j.dump(2) << "\n";
}

DatasetManifest load_manifest(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("load_manifest: cannot open " + path.string());
  json j = json::parse(is);
  if (j.value("format", "") != "enspost-dataset-1")
    throw std::runtime_error("load_manifest: unknown format in " + path.string());
  DatasetManifest m;
  m.grid_h = j.at("grid").at("h").get<int>();
  m.grid_w = j.at("grid").at("w").get<int>();
  m.n_members = j.at("n_members").get<int>();
  m.n_dates = j.at("n_dates").get<int>();
  m.seed = j.at("seed").get<std::uint64_t>();
  m.splits.train = j.at("splits").at("train").get<std::vector<std::string>>();
  m.splits.val = j.at("splits").at("val").get<std::vector<std::string>>();
  m.splits.test = j.at("splits").at("test").get<std::vector<std::string>>();
  m.dir = path.parent_path();
  return m;
}

void write_sample(const std::filesystem::path& dir, const std::string& name,
                  const EnsembleSample& s) {
  const int n = static_cast<int>(s.members[0].size());
  const GeoGrid& first = s.members[0][0];
  Grd1 g;
  g.h = static_cast<std::uint32_t>(first.h);
  g.w = static_cast<std::uint32_t>(first.w);
  g.c = static_cast<std::uint32_t>(3 * n + 1);
  g.data.assign(static_cast<std::size_t>(g.h) * g.w * g.c, 0.0f);

  json channels = json::array();
  std::uint32_t ci = 0;
  for (int l = 0; l < 3; ++l) {
    if (static_cast<int>(s.members[l].size()) != n)
      throw std::invalid_argument("write_sample: ragged member counts");
    for (int m = 0; m < n; ++m) {
      grd1_set_channel(g, ci, s.members[l][m]);
      channels.push_back({{"kind", "member"},
                          {"lead_hours", kLeadHours[l]},
                          {"member", m}});
      ++ci;
    }
  }
  grd1_set_channel(g, ci, s.ground_truth);
  channels.push_back({{"kind", "truth"}, {"lead_hours", kLeadHours[2]}});

  grd1_write(dir / name, g);
  json side;
  side["field_id"] = field_id_name(first.field_id);
  side["units"] = first.units;
  side["date_index"] = s.date_index;
  side["channels"] = channels;
  std::ofstream os(dir / (name + ".json"), std::ios::binary);
  if (!os) throw std::runtime_error("write_sample: cannot open sidecar");
  os << side.dump(2) << "\n";
}

EnsembleSample load_sample(const std::filesystem::path& path) {
  Grd1 g = grd1_read(path);
  std::ifstream is(path.string() + ".json");
  if (!is)
    throw std::runtime_error("load_sample: missing sidecar for " + path.string());
  json side = json::parse(is);

  EnsembleSample s;
  s.date_index = side.at("date_index").get<int>();
  FieldId fid = field_id_from(side.at("field_id").get<std::string>());
  std::string units = side.at("units").get<std::string>();
  const json& channels = side.at("channels");
  if (channels.size() != g.c)
    throw std::runtime_error("load_sample: sidecar channel count mismatch");

  for (std::uint32_t ci = 0; ci < g.c; ++ci) {
    GeoGrid grid = grd1_channel_grid(g, ci);
    grid.field_id = fid;
    grid.units = units;
    const json& ch = channels[ci];
    std::string kind = ch.at("kind").get<std::string>();
    int lead = ch.at("lead_hours").get<int>();
    if (kind == "truth") {
      s.ground_truth = std::move(grid);
    } else if (kind == "member") {
      int l = lead == 0 ? 0 : lead == 24 ? 1 : lead == 48 ? 2 : -1;
      if (l < 0) throw std::runtime_error("load_sample: unknown lead time");
      s.members[l].push_back(std::move(grid));
    } else {
      throw std::runtime_error("load_sample: unknown channel kind " + kind);
    }
  }
  s.finalize();
  return s;
}

std::vector<EnsembleSample> load_split(const DatasetManifest& m,
                                       const std::string& split) {
  const std::vector<std::string>* files = nullptr;
  if (split == "train") files = &m.splits.train;
  else if (split == "val") files = &m.splits.val;
  else if (split == "test") files = &m.splits.test;
  else throw std::invalid_argument("load_split: unknown split " + split);
  std::vector<EnsembleSample> out;
  out.reserve(files->size());
  for (const std::string& f : *files) out.push_back(load_sample(m.dir / f));
  return out;
}

}  // namespace enspost
