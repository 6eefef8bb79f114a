#include "enspost/evaluate.hpp"

#include <cmath>
#include <cstdio>
#include <memory>
#include <stdexcept>
#include <utility>

#include "enspost/baselines.hpp"
#include "enspost/checkpoint.hpp"
#include "enspost/models.hpp"

namespace enspost::eval {

namespace {

constexpr double kPi = 3.14159265358979323846;

// Digits-only positive integer; returns -1 on anything else (sign, leading
// zero, empty, trailing junk).
int parse_count(const std::string& s) {
  if (s.empty() || s.size() > 6) return -1;
  if (s[0] == '0') return -1;
  long v = 0;
  for (char c : s) {
    if (c < '0' || c > '9') return -1;
    v = v * 10 + (c - '0');
  }
  return static_cast<int>(v);
}

[[noreturn]] void bad_id(const std::string& s, const std::string& why = "") {
  std::string msg = "unknown model id \"" + s + "\"";
  if (!why.empty()) msg += ": " + why;
  throw std::invalid_argument(msg + "\n" + model_grammar());
}

}  // namespace

std::string model_grammar() {
  return "model ids: E{n} raw ensemble | B{n} bias net | U{n} spread net | "
         "B{n}U{n}C calibrated pair (same n twice) | Lin{n} linear "
         "regression | EMOS5 ensemble statistics; {n} = member count, e.g. "
         "E10, B5, U5, Lin5, B5U5C";
}

ModelId parse_model_id(const std::string& s) {
  ModelId id;
  id.text = s;
  if (s.rfind("EMOS", 0) == 0) {
    int n = parse_count(s.substr(4));
    if (n < 0) bad_id(s);
    if (n != 5) bad_id(s, "EMOS has the 8-parameter 5-member form; use EMOS5");
    id.kind = ModelId::Kind::emos;
    id.n_members = 5;
    return id;
  }
  if (s.rfind("Lin", 0) == 0) {
    int n = parse_count(s.substr(3));
    if (n < 1) bad_id(s);
    id.kind = ModelId::Kind::linreg;
    id.n_members = n;
    return id;
  }
  if (!s.empty() && s[0] == 'E') {
    int n = parse_count(s.substr(1));
    if (n < 1) bad_id(s);
    id.kind = ModelId::Kind::ensemble;
    id.n_members = n;
    return id;
  }
  if (!s.empty() && s[0] == 'U') {
    int n = parse_count(s.substr(1));
    if (n < 2) bad_id(s, "spread nets need at least 2 members");
    id.kind = ModelId::Kind::spread;
    id.n_members = n;
    return id;
  }
  if (!s.empty() && s[0] == 'B') {
    std::size_t u = s.find('U');
    if (u == std::string::npos) {
      int n = parse_count(s.substr(1));
      if (n < 2) bad_id(s, "bias nets need at least 2 members");
      id.kind = ModelId::Kind::bias;
      id.n_members = n;
      return id;
    }
    if (s.back() != 'C') bad_id(s);
    int nb = parse_count(s.substr(1, u - 1));
    int nu = parse_count(s.substr(u + 1, s.size() - u - 2));
    if (nb < 2 || nu < 2) bad_id(s);
    if (nb != nu) bad_id(s, "B{n}U{n}C member counts must match");
    id.kind = ModelId::Kind::calibrated;
    id.n_members = nb;
    return id;
  }
  bad_id(s);
}

std::string artifact_name(const ModelId& id) {
  switch (id.kind) {
    case ModelId::Kind::ensemble:
      return "";
    case ModelId::Kind::bias:
    case ModelId::Kind::spread:
    case ModelId::Kind::calibrated:
      return id.text + ".ckpt";
    case ModelId::Kind::linreg:
      return id.text + "_mean.grd";
    case ModelId::Kind::emos:
      return id.text + ".json";
  }
  throw std::logic_error("artifact_name: bad kind");
}

std::vector<double> latitude_weights(int h, bool area_weighted) {
  std::vector<double> w(static_cast<std::size_t>(h), 1.0);
  if (!area_weighted) return w;
  for (int i = 0; i < h; ++i) {
    double lat = 90.0 - (i + 0.5) * 180.0 / h;
    w[static_cast<std::size_t>(i)] = std::cos(lat * kPi / 180.0);
  }
  return w;
}

Region global_region(int h, int w) {
  return Region{0, h, 0, w, "global"};
}

Region parse_region(const std::string& s, int h, int w) {
  int y0, y1, x0, x1;
  char tail;
  if (std::sscanf(s.c_str(), "%d:%d,%d:%d%c", &y0, &y1, &x0, &x1, &tail) != 4)
    throw std::invalid_argument("region must be \"y0:y1,x0:x1\", got \"" + s +
                                "\"");
  if (y0 < 0 || y1 > h || y0 >= y1 || x0 < 0 || x1 > w || x0 >= x1)
    throw std::invalid_argument("region \"" + s + "\" out of bounds for " +
                                std::to_string(h) + "x" + std::to_string(w) +
                                " grid");
  Region r{y0, y1, x0, x1, ""};
  r.name = std::to_string(y0) + ":" + std::to_string(y1) + "," +
           std::to_string(x0) + ":" + std::to_string(x1);
  return r;
}

namespace {

// Validation, not runtime failure: the caller named a model that was never
// trained into this directory.
void require_exists(const std::filesystem::path& p) {
  if (!std::filesystem::exists(p))
    throw std::invalid_argument("missing model artifact: " + p.string());
}

void check_members(int have, int want, const std::filesystem::path& path) {
  if (have != want)
    throw std::runtime_error(path.string() + " was trained with " +
                             std::to_string(have) + " members, the id names " +
                             std::to_string(want));
}

void check_las(const nlohmann::json& meta, const LasMaps* las,
               const std::filesystem::path& path) {
  if (!las)
    throw std::invalid_argument(
        "net-backed models need the standardization maps");
  std::uint64_t have = meta.value("las_fingerprint", std::uint64_t{0});
  if (have != 0 && have != las->fingerprint())
    throw std::runtime_error(
        path.string() +
        " was trained against different standardization maps");
}

template <typename T>
GeoGrid tensor_plane(const EnsembleSample& proto, const nn::Tensor<T>& t) {
  GeoGrid g(t.shape().h, t.shape().w);
  g.field_id = proto.ground_truth.field_id;
  g.units = proto.ground_truth.units;
  for (int i = 0; i < t.shape().h; ++i)
    for (int j = 0; j < t.shape().w; ++j)
      g.at(i, j) = static_cast<double>(t.at(0, 0, i, j));
  return g;
}

template <typename T>
ForecastFn bias_forecast_fn(const std::filesystem::path& path,
                            const nlohmann::json& meta, const LasMaps* las,
                            int want_members) {
  auto cfg = nn::ModelConfig::from_json(meta.at("config"));
  check_members(cfg.n_input_members, want_members, path);
  auto net = std::make_shared<nn::BiasNet<T>>(cfg, 1);
  nn::load_checkpoint(path, net->store());
  net->las_fingerprint = meta.value("las_fingerprint", std::uint64_t{0});
  const LasMaps maps = *las;
  return [net, maps, cfg](const EnsembleSample& s) {
    Batch<T> b = assemble_batch<T>({&s}, maps, cfg.n_input_members);
    nn::Tensor<T> mu = net->corrected_mean(nullptr, b.input, false);
    DateForecast fc;
    fc.mu = maps.destandardize(tensor_plane(s, mu));
    return fc;
  };
}

template <typename T>
ForecastFn spread_forecast_fn(const std::filesystem::path& path,
                              const nlohmann::json& meta, const LasMaps* las,
                              int want_members) {
  auto cfg = nn::ModelConfig::from_json(meta.at("config"));
  check_members(cfg.n_input_members, want_members, path);
  auto net = std::make_shared<nn::SpreadNet<T>>(cfg, 1);
  nn::load_checkpoint(path, net->store());
  net->las_fingerprint = meta.value("las_fingerprint", std::uint64_t{0});
  const LasMaps maps = *las;
  return [net, maps, cfg](const EnsembleSample& s) {
    Batch<T> b = assemble_batch<T>({&s}, maps, cfg.n_input_members);
    nn::Tensor<T> sig = net->forward(nullptr, b.input, false);
    DateForecast fc;
    fc.sigma = maps.unscale(tensor_plane(s, sig));
    return fc;
  };
}

template <typename T>
ForecastFn calibrated_forecast_fn(const std::filesystem::path& bias_path,
                                  const std::filesystem::path& spread_path,
                                  const nlohmann::json& bias_meta,
                                  const nlohmann::json& spread_meta,
                                  const LasMaps* las, int want_members) {
  auto bias_cfg = nn::ModelConfig::from_json(bias_meta.at("config"));
  auto spread_cfg = nn::ModelConfig::from_json(spread_meta.at("config"));
  check_members(bias_cfg.n_input_members, want_members, bias_path);
  check_members(spread_cfg.n_input_members, want_members, spread_path);
  auto bias = std::make_shared<nn::BiasNet<T>>(bias_cfg, 1);
  auto spread = std::make_shared<nn::SpreadNet<T>>(spread_cfg, 1);
  nn::load_checkpoint(bias_path, bias->store());
  nn::load_checkpoint(spread_path, spread->store());
  bias->las_fingerprint =
      bias_meta.value("las_fingerprint", std::uint64_t{0});
  spread->las_fingerprint =
      spread_meta.value("las_fingerprint", std::uint64_t{0});
  const LasMaps maps = *las;
  return [bias, spread, maps](const EnsembleSample& s) {
    nn::ForecastDistribution d =
        nn::calibrated_forecast(*bias, *spread, s, maps);
    DateForecast fc;
    fc.mu = std::move(d.mu);
    fc.sigma = std::move(d.sigma);
    fc.gaussian_crps = true;
    return fc;
  };
}

}  // namespace

ForecastFn make_forecast_fn(const ModelId& id,
                            const std::filesystem::path& models_dir,
                            const LasMaps* las) {
  switch (id.kind) {
    case ModelId::Kind::ensemble: {
      const int n = id.n_members;
      return [n](const EnsembleSample& s) {
        if (static_cast<int>(s.members[2].size()) < n)
          throw std::runtime_error("sample has " +
                                   std::to_string(s.members[2].size()) +
                                   " members, E" + std::to_string(n) +
                                   " needs " + std::to_string(n));
        DateForecast fc;
        fc.mu = s.reduced_mean(2, n);
        fc.sigma = s.reduced_spread(2, n);
        fc.members.assign(s.members[2].begin(), s.members[2].begin() + n);
        return fc;
      };
    }
    case ModelId::Kind::bias: {
      const auto path = models_dir / artifact_name(id);
      require_exists(path);
      nlohmann::json meta = nn::read_checkpoint_meta(path);
      check_las(meta, las, path);
      if (meta.at("dtype") == "f32")
        return bias_forecast_fn<float>(path, meta, las, id.n_members);
      return bias_forecast_fn<double>(path, meta, las, id.n_members);
    }
    case ModelId::Kind::spread: {
      const auto path = models_dir / artifact_name(id);
      require_exists(path);
      nlohmann::json meta = nn::read_checkpoint_meta(path);
      check_las(meta, las, path);
      if (meta.at("dtype") == "f32")
        return spread_forecast_fn<float>(path, meta, las, id.n_members);
      return spread_forecast_fn<double>(path, meta, las, id.n_members);
    }
    case ModelId::Kind::calibrated: {
      ModelId bias_id;
      bias_id.kind = ModelId::Kind::bias;
      bias_id.n_members = id.n_members;
      bias_id.text = "B" + std::to_string(id.n_members);
      const auto bias_path = models_dir / artifact_name(bias_id);
      const auto spread_path = models_dir / artifact_name(id);
      require_exists(bias_path);
      require_exists(spread_path);
      nlohmann::json bm = nn::read_checkpoint_meta(bias_path);
      nlohmann::json sm = nn::read_checkpoint_meta(spread_path);
      check_las(bm, las, bias_path);
      check_las(sm, las, spread_path);
      if (bm.at("dtype") != sm.at("dtype"))
        throw std::runtime_error("calibrated pair mixes dtypes: " +
                                 bias_path.string() + " is " +
                                 bm.at("dtype").get<std::string>() + ", " +
                                 spread_path.string() + " is " +
                                 sm.at("dtype").get<std::string>());
      if (bm.at("dtype") == "f32")
        return calibrated_forecast_fn<float>(bias_path, spread_path, bm, sm,
                                             las, id.n_members);
      return calibrated_forecast_fn<double>(bias_path, spread_path, bm, sm,
                                            las, id.n_members);
    }
    case ModelId::Kind::linreg: {
      const auto mean_path = models_dir / artifact_name(id);
      require_exists(mean_path);
      auto mean_model =
          std::make_shared<baselines::LinRegModel>(baselines::load_linreg(mean_path));
      if (mean_model->target != baselines::LinTarget::mean)
        throw std::runtime_error(mean_path.string() +
                                 " is not a mean-target model");
      check_members(mean_model->n_members, id.n_members, mean_path);
      std::shared_ptr<baselines::LinRegModel> spread_model;
      const auto spread_path =
          models_dir / (id.text + "_spread.grd");
      if (std::filesystem::exists(spread_path)) {
        spread_model = std::make_shared<baselines::LinRegModel>(
            baselines::load_linreg(spread_path));
        if (spread_model->target != baselines::LinTarget::spread)
          throw std::runtime_error(spread_path.string() +
                                   " is not a spread-target model");
      }
      return [mean_model, spread_model](const EnsembleSample& s) {
        DateForecast fc;
        fc.mu = mean_model->predict(s);
        if (spread_model) fc.sigma = spread_model->predict(s);
        return fc;
      };
    }
    case ModelId::Kind::emos: {
      const auto path = models_dir / artifact_name(id);
      require_exists(path);
      auto model =
          std::make_shared<baselines::EmosModel>(baselines::load_emos(path));
      return [model](const EnsembleSample& s) {
        DateForecast fc;
        model->predict(s, &fc.mu, &fc.sigma);
        fc.gaussian_crps = true;
        return fc;
      };
    }
  }
  throw std::logic_error("make_forecast_fn: bad kind");
}

namespace {

// Weighted mean of v over the region; weights vary by row only.
double region_mean(const GeoGrid& v, const Region& r,
                   const std::vector<double>& w) {
  double num = 0.0, den = 0.0;
  for (int i = r.y0; i < r.y1; ++i)
    for (int j = r.x0; j < r.x1; ++j) {
      num += w[static_cast<std::size_t>(i)] * v.at(i, j);
      den += w[static_cast<std::size_t>(i)];
    }
  return num / den;
}

double region_rmse(const GeoGrid& a, const GeoGrid& b, const Region& r,
                   const std::vector<double>& w) {
  double num = 0.0, den = 0.0;
  for (int i = r.y0; i < r.y1; ++i)
    for (int j = r.x0; j < r.x1; ++j) {
      const double e = a.at(i, j) - b.at(i, j);
      num += w[static_cast<std::size_t>(i)] * e * e;
      den += w[static_cast<std::size_t>(i)];
    }
  return std::sqrt(num / den);
}

void check_dims(const GeoGrid& g, int h, int w, const char* what) {
  if (g.h != h || g.w != w)
    throw std::runtime_error(std::string("evaluate_model: ") + what +
                             " dims do not match the sample grid");
}

}  // namespace

EvalResult evaluate_model(const ForecastFn& fn,
                          const std::vector<const EnsembleSample*>& split,
                          const EvalOptions& opt) {
  if (split.empty())
    throw std::invalid_argument("evaluate_model: empty split");
  const int h = split[0]->ground_truth.h;
  const int w = split[0]->ground_truth.w;
  const Region rg =
      opt.region.name.empty() ? global_region(h, w) : opt.region;
  if (rg.y1 > h || rg.x1 > w)
    throw std::invalid_argument("evaluate_model: region exceeds the grid");
  const std::vector<double> wts = latitude_weights(h, opt.area_weighted);

  EvalResult res;
  GeoGrid crps_sum(h, w);
  int crps_dates = 0;
  std::vector<double> pool;

  for (const EnsembleSample* s : split) {
    check_dims(s->ground_truth, h, w, "ground truth");
    DateForecast fc = fn(*s);
    if (opt.dressed_ensembles && !fc.members.empty()) {
      fc.members.clear();
      for (double& v : fc.sigma.values) v = std::max(v, 1e-9);
      fc.gaussian_crps = true;
    }

    GeoGrid crps_grid;
    if (!fc.members.empty()) {
      for (const GeoGrid& m : fc.members) check_dims(m, h, w, "member");
      crps_grid = GeoGrid(h, w);
      for (int i = 0; i < h; ++i)
        for (int j = 0; j < w; ++j) {
          pool.clear();
          for (const GeoGrid& m : fc.members) pool.push_back(m.at(i, j));
          crps_grid.at(i, j) =
              metrics::crps_empirical(pool, s->ground_truth.at(i, j));
        }
    } else if (fc.gaussian_crps) {
      check_dims(fc.mu, h, w, "mu");
      check_dims(fc.sigma, h, w, "sigma");
      crps_grid = GeoGrid(h, w);
      for (int i = 0; i < h; ++i)
        for (int j = 0; j < w; ++j)
          crps_grid.at(i, j) = metrics::crps_gaussian(
              fc.mu.at(i, j), fc.sigma.at(i, j), s->ground_truth.at(i, j));
    }
    if (crps_grid.size() != 0) {
      for (std::size_t p = 0; p < crps_sum.size(); ++p)
        crps_sum.values[p] += crps_grid.values[p];
      ++crps_dates;
      res.rows.push_back({s->date_index, rg.name, "crps",
                          region_mean(crps_grid, rg, wts)});
    }
    if (fc.mu.size() != 0) {
      check_dims(fc.mu, h, w, "mu");
      res.rows.push_back({s->date_index, rg.name, "rmse_mean",
                          region_rmse(fc.mu, s->ground_truth, rg, wts)});
    }
    if (fc.sigma.size() != 0) {
      check_dims(fc.sigma, h, w, "sigma");
      res.rows.push_back({s->date_index, rg.name, "rmse_spread",
                          region_rmse(fc.sigma, s->spread[2], rg, wts)});
    }
  }

  std::vector<metrics::ScoreRow> agg = aggregate_scores(res.rows);
  res.rows.insert(res.rows.end(), agg.begin(), agg.end());
  if (crps_dates > 0) {
    res.crps_map = crps_sum;
    for (double& v : res.crps_map.values) v /= crps_dates;
    res.crps_map.field_id = split[0]->ground_truth.field_id;
    res.crps_map.units = split[0]->ground_truth.units;
  }
  return res;
}

std::vector<metrics::ScoreRow> aggregate_scores(
    const std::vector<metrics::ScoreRow>& per_date) {
  struct Group {
    std::string region, metric;
    double sum = 0.0;
    int n = 0;
  };
  std::vector<Group> groups;
  for (const metrics::ScoreRow& r : per_date) {
    if (r.date_index < 0) continue;
    const bool quadratic = r.metric.rfind("rmse", 0) == 0;
    Group* g = nullptr;
    for (Group& cand : groups)
      if (cand.region == r.region && cand.metric == r.metric) {
        g = &cand;
        break;
      }
    if (!g) {
      groups.push_back({r.region, r.metric, 0.0, 0});
      g = &groups.back();
    }
    g->sum += quadratic ? r.value * r.value : r.value;
    g->n += 1;
  }
  std::vector<metrics::ScoreRow> out;
  for (const Group& g : groups) {
    const double mean = g.sum / g.n;
    const bool quadratic = g.metric.rfind("rmse", 0) == 0;
    out.push_back({-1, g.region, g.metric,
                   quadratic ? std::sqrt(mean) : mean});
  }
  return out;
}

double aggregate_value(const std::vector<metrics::ScoreRow>& rows,
                       const std::string& region, const std::string& metric) {
  for (const metrics::ScoreRow& r : rows)
    if (r.date_index < 0 && r.region == region && r.metric == metric)
      return r.value;
  throw std::invalid_argument("no aggregate row for region \"" + region +
                              "\" metric \"" + metric + "\"");
}

}  // namespace enspost::eval
