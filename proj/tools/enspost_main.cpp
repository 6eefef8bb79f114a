#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include <enspost/build_info.hpp>

#include "enspost/baselines.hpp"
#include "enspost/checkpoint.hpp"
#include "enspost/dataset.hpp"
#include "enspost/evaluate.hpp"
#include "enspost/heatmap.hpp"
#include "enspost/kernels.hpp"
#include "enspost/metrics.hpp"
#include "enspost/models.hpp"
#include "enspost/preprocess.hpp"
#include "enspost/rng.hpp"
#include "enspost/synthdata.hpp"
#include "enspost/train.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace enspost;

namespace {

// ---------------------------------------------------------------- plumbing

std::string hex64(std::uint64_t v) {
  char buf[19];
  std::snprintf(buf, sizeof(buf), "0x%016llx",
                static_cast<unsigned long long>(v));
  return buf;
}

json load_json_file(const fs::path& path) {
  std::ifstream is(path);
  if (!is)
    throw std::invalid_argument("cannot open config file " + path.string());
  json j;
  try {
    is >> j;
  } catch (const json::exception& e) {
    throw std::invalid_argument("bad JSON in " + path.string() + ": " +
                                e.what());
  }
  return j;
}

void require_file(const fs::path& p, const char* what) {
  if (!fs::exists(p))
    throw std::invalid_argument(std::string(what) + " not found: " +
                                p.string());
}

// Reproducibility record written next to every command's outputs: the
// resolved configs, FNV-1a hashes of every input file consumed, and the
// build identity.
struct Manifest {
  json j;
  Manifest(const std::string& command) {
    j["command"] = command;
    j["build"] = kBuildDescribe;
    j["backend"] = kernels::backend_name(kernels::active_backend());
    j["inputs"] = json::object();
  }
  void input(const fs::path& p) {
    j["inputs"][p.string()] = hex64(fnv1a_file(p));
  }
  void write(const fs::path& dir, const std::string& name) {
    fs::create_directories(dir);
    std::ofstream os(dir / name, std::ios::binary);
    os << j.dump(2) << '\n';
    if (!os)
      throw std::runtime_error("cannot write manifest " +
                               (dir / name).string());
  }
};

json synth_config_to_json(const SynthConfig& c) {
  return json{{"seed", c.seed},
              {"grid_h", c.grid_h},
              {"grid_w", c.grid_w},
              {"n_dates", c.n_dates},
              {"n_members", c.n_members},
              {"spectral_slope", c.spectral_slope},
              {"advection_speed", c.advection_speed},
              {"speed_jitter", c.speed_jitter},
              {"noise_growth", c.noise_growth},
              {"bias_field_amplitude", c.bias_field_amplitude},
              {"innovation_rho", c.innovation_rho},
              {"season_amplitude", c.season_amplitude},
              {"season_period", c.season_period},
              {"split_fractions", c.split_fractions}};
}

SynthConfig synth_config_from_json(const json& j) {
  SynthConfig c;
  c.seed = j.value("seed", c.seed);
  c.grid_h = j.value("grid_h", c.grid_h);
  c.grid_w = j.value("grid_w", c.grid_w);
  c.n_dates = j.value("n_dates", c.n_dates);
  c.n_members = j.value("n_members", c.n_members);
  c.spectral_slope = j.value("spectral_slope", c.spectral_slope);
  c.advection_speed = j.value("advection_speed", c.advection_speed);
  c.speed_jitter = j.value("speed_jitter", c.speed_jitter);
  c.noise_growth = j.value("noise_growth", c.noise_growth);
  c.bias_field_amplitude =
      j.value("bias_field_amplitude", c.bias_field_amplitude);
  c.innovation_rho = j.value("innovation_rho", c.innovation_rho);
  c.season_amplitude = j.value("season_amplitude", c.season_amplitude);
  c.season_period = j.value("season_period", c.season_period);
  c.split_fractions = j.value("split_fractions", c.split_fractions);
  return c;
}

std::vector<const EnsembleSample*> ptrs(
    const std::vector<EnsembleSample>& v) {
  std::vector<const EnsembleSample*> out;
  out.reserve(v.size());
  for (const auto& s : v) out.push_back(&s);
  return out;
}

// ------------------------------------------------------------ subcommands

struct SynthArgs {
  std::string out;
  std::string config;
  std::optional<std::uint64_t> seed;
};

int cmd_synth(const SynthArgs& a) {
  SynthConfig cfg;
  if (!a.config.empty()) cfg = synth_config_from_json(load_json_file(a.config));
  if (a.seed) cfg.seed = *a.seed;
  cfg.validate();
  SynthDataset ds = generate_dataset(cfg);
  DatasetManifest m = write_dataset(ds, a.out);
  Manifest run("synth");
  run.j["config"] = synth_config_to_json(cfg);
  if (!a.config.empty()) run.input(a.config);
  run.write(a.out, "synth_manifest.json");
  std::cout << "wrote " << m.n_dates << " dates (" << m.grid_h << "x"
            << m.grid_w << ", " << m.n_members << " members) to " << a.out
            << "\n";
  return 0;
}

struct LasFitArgs {
  std::string data;
  std::string out;
  bool global_stats = false;
  int window = 7;
  double sigma = 10.0;
  double eps = 1e-3;
};

int cmd_las_fit(const LasFitArgs& a) {
  require_file(fs::path(a.data) / "manifest.json", "dataset manifest");
  DatasetManifest m = load_manifest(fs::path(a.data) / "manifest.json");
  LasConfig cfg;
  cfg.window = a.window;
  cfg.sigma = a.sigma;
  cfg.eps = a.eps;
  cfg.global_stats = a.global_stats;

  // Maps come from training inputs only: every member at every lead time.
  std::vector<EnsembleSample> train_set = load_split(m, "train");
  LasMaps::Fitter fitter;
  for (const EnsembleSample& s : train_set)
    for (int l = 0; l < 3; ++l)
      for (const GeoGrid& g : s.members[l]) fitter.add(g);
  LasMaps maps = fitter.finish(cfg);
  fs::path out(a.out);
  if (out.has_parent_path()) fs::create_directories(out.parent_path());
  maps.save(out);

  Manifest run("las_fit");
  run.j["config"] = {{"window", cfg.window},
                     {"sigma", cfg.sigma},
                     {"truncate", cfg.truncate},
                     {"eps", cfg.eps},
                     {"global_stats", cfg.global_stats}};
  run.j["fingerprint"] = hex64(maps.fingerprint());
  run.input(fs::path(a.data) / "manifest.json");
  run.write(out.has_parent_path() ? out.parent_path() : fs::path("."),
            "las_fit_manifest.json");
  std::cout << "fitted standardization maps on " << train_set.size()
            << " training dates, fingerprint " << hex64(maps.fingerprint())
            << "\n";
  return 0;
}

struct TrainArgs {
  std::string model;
  std::string data;
  std::string las;
  std::string out;
  std::string config;
  std::optional<std::uint64_t> seed;
  bool f64 = false;
  bool paper_presets = false;
  bool wrap_lon = true;
};

// Recipe defaults; any user-supplied "train" config key wins.
train::TrainConfig recipe_train_config(const eval::ModelId& id,
                                       bool paper_presets) {
  train::TrainConfig tc;
  switch (id.kind) {
    case eval::ModelId::Kind::bias:
      tc.loss = train::Loss::mse;
      tc.max_steps =
          paper_presets ? train::kPaperBiasSteps : train::kDeskBiasSteps;
      break;
    case eval::ModelId::Kind::spread:
      tc.loss = train::Loss::mse;
      tc.max_steps =
          paper_presets ? train::kPaperSpreadSteps : train::kDeskSpreadSteps;
      break;
    case eval::ModelId::Kind::calibrated:
      tc.loss = train::Loss::crps;
      tc.max_steps =
          paper_presets ? train::kPaperSpreadSteps : train::kDeskSpreadSteps;
      break;
    case eval::ModelId::Kind::emos:
      tc.loss = train::Loss::crps;
      tc.lr = 0.02;       // 8 global params tolerate a far larger step
      tc.batch_size = 8;  // batches count dates, not samples
      tc.max_steps = 2000;
      tc.l2_weight = 0.0;
      break;
    default:
      break;
  }
  return tc;
}

template <typename T>
void train_net_model(const eval::ModelId& id, const DatasetManifest& m,
                     const LasMaps& las, const train::TrainConfig& tc,
                     const json& model_overrides, std::uint64_t model_seed,
                     const fs::path& models_dir, Manifest& run) {
  std::vector<EnsembleSample> train_set = load_split(m, "train");
  std::vector<EnsembleSample> val_set = load_split(m, "val");
  auto train_ptrs = ptrs(train_set);
  auto val_ptrs = ptrs(val_set);

  nn::ModelConfig mc;
  mc.grid_h = m.grid_h;
  mc.grid_w = m.grid_w;
  mc.n_input_members = id.n_members;
  if (id.kind == eval::ModelId::Kind::bias) mc.head = nn::Head::bias;
  // User overrides on top of the recipe's config.
  if (!model_overrides.empty()) {
    json merged = mc.to_json();
    merged.update(model_overrides);
    mc = nn::ModelConfig::from_json(merged);
  }
  mc.validate();

  train::TrainResult result;
  json meta{{"config", json()},  // filled per branch
            {"train_config", json::parse(tc.to_json())},
            {"las_fingerprint", las.fingerprint()},
            {"model_seed", model_seed}};

  if (id.kind == eval::ModelId::Kind::bias) {
    nn::BiasNet<T> net(mc, model_seed);
    result = train::train_bias(net, train_ptrs, val_ptrs, las, tc);
    meta["kind"] = "bias";
    meta["config"] = mc.to_json();
    meta["best_step"] = result.best_step;
    meta["best_val_loss"] = result.best_val_loss;
    nn::save_checkpoint(models_dir / (id.text + ".ckpt"), net.store(), meta);
  } else if (id.kind == eval::ModelId::Kind::spread) {
    nn::SpreadNet<T> net(mc, model_seed);
    result = train::train_spread(net, train_ptrs, val_ptrs, las, tc);
    meta["kind"] = "spread";
    meta["config"] = mc.to_json();
    meta["best_step"] = result.best_step;
    meta["best_val_loss"] = result.best_val_loss;
    nn::save_checkpoint(models_dir / (id.text + ".ckpt"), net.store(), meta);
  } else {  // calibrated: warm-start U{n}, train against frozen B{n}
    const std::string nstr = std::to_string(id.n_members);
    const fs::path bias_path = models_dir / ("B" + nstr + ".ckpt");
    const fs::path spread_path = models_dir / ("U" + nstr + ".ckpt");
    require_file(bias_path, "bias checkpoint (train B first)");
    require_file(spread_path, "spread checkpoint (train U first)");
    run.input(bias_path);
    run.input(spread_path);

    json bias_meta = nn::read_checkpoint_meta(bias_path);
    json spread_meta = nn::read_checkpoint_meta(spread_path);
    if (bias_meta.at("dtype") != nn::dtype_name<T>() ||
        spread_meta.at("dtype") != nn::dtype_name<T>())
      throw std::invalid_argument(
          "checkpoint dtype does not match the requested training dtype");
    nn::ModelConfig bias_cfg =
        nn::ModelConfig::from_json(bias_meta.at("config"));
    nn::ModelConfig spread_cfg =
        nn::ModelConfig::from_json(spread_meta.at("config"));
    nn::BiasNet<T> frozen(bias_cfg, 1);
    nn::load_checkpoint(bias_path, frozen.store());
    frozen.las_fingerprint =
        bias_meta.value("las_fingerprint", std::uint64_t{0});
    nn::SpreadNet<T> net(spread_cfg, 1);
    nn::load_checkpoint(spread_path, net.store());
    net.las_fingerprint =
        spread_meta.value("las_fingerprint", std::uint64_t{0});

    result = train::train_crps(net, frozen, train_ptrs, val_ptrs, las, tc);
    meta["kind"] = "spread";
    meta["config"] = spread_cfg.to_json();
    meta["calibrated_against"] = "B" + nstr;
    meta["best_step"] = result.best_step;
    meta["best_val_loss"] = result.best_val_loss;
    nn::save_checkpoint(models_dir / (id.text + ".ckpt"), net.store(), meta);
  }

  train::write_history_csv(models_dir / ("history_" + id.text + ".csv"),
                           result.history);
  run.j["result"] = {{"steps_run", result.steps_run},
                     {"best_step", result.best_step},
                     {"best_val_loss", result.best_val_loss}};
  std::cout << id.text << ": best val loss " << result.best_val_loss
            << " at step " << result.best_step << " (" << result.steps_run
            << " steps run)\n";
}

int cmd_train(const TrainArgs& a) {
  eval::ModelId id = eval::parse_model_id(a.model);
  if (id.kind == eval::ModelId::Kind::ensemble)
    throw std::invalid_argument(
        "raw ensembles have no trainable artifact; pick B/U/Lin/EMOS ids");

  require_file(fs::path(a.data) / "manifest.json", "dataset manifest");
  DatasetManifest m = load_manifest(fs::path(a.data) / "manifest.json");
  if (id.n_members > m.n_members)
    throw std::invalid_argument("model wants " + std::to_string(id.n_members) +
                                " members, dataset has " +
                                std::to_string(m.n_members));

  json user = a.config.empty() ? json::object() : load_json_file(a.config);
  train::TrainConfig tc = recipe_train_config(id, a.paper_presets);
  if (user.contains("train")) {
    json merged = json::parse(tc.to_json());
    merged.update(user.at("train"));
    tc = train::TrainConfig::from_json(merged.dump());
  }
  if (a.seed) tc.seed = *a.seed;
  tc.validate();

  const fs::path models_dir(a.out);
  fs::create_directories(models_dir);
  Manifest run("train");
  run.j["model"] = id.text;
  run.j["dtype"] = a.f64 ? "f64" : "f32";
  run.j["train_config"] = json::parse(tc.to_json());
  run.j["paper_presets"] = a.paper_presets;
  run.input(fs::path(a.data) / "manifest.json");
  if (!a.config.empty()) run.input(a.config);

  if (id.kind == eval::ModelId::Kind::linreg) {
    std::vector<EnsembleSample> train_set = load_split(m, "train");
    auto tp = ptrs(train_set);
    baselines::LinRegModel mean_model =
        baselines::linreg_fit(tp, baselines::LinTarget::mean, id.n_members);
    baselines::LinRegModel spread_model =
        baselines::linreg_fit(tp, baselines::LinTarget::spread, id.n_members);
    baselines::save_linreg(models_dir / (id.text + "_mean.grd"), mean_model);
    baselines::save_linreg(models_dir / (id.text + "_spread.grd"),
                           spread_model);
    std::cout << id.text << ": fitted mean and spread stacks on "
              << train_set.size() << " dates\n";
  } else if (id.kind == eval::ModelId::Kind::emos) {
    std::vector<EnsembleSample> train_set = load_split(m, "train");
    std::vector<EnsembleSample> val_set = load_split(m, "val");
    train::TrainResult result;
    baselines::EmosModel fit = baselines::emos_fit(
        baselines::emos_dates(ptrs(train_set)),
        baselines::emos_dates(ptrs(val_set)), tc, &result);
    baselines::save_emos(models_dir / (id.text + ".json"), fit);
    train::write_history_csv(models_dir / ("history_" + id.text + ".csv"),
                             result.history);
    run.j["result"] = {{"steps_run", result.steps_run},
                       {"best_step", result.best_step},
                       {"best_val_loss", result.best_val_loss}};
    std::cout << id.text << ": best val CRPS " << result.best_val_loss
              << " at step " << result.best_step << "\n";
  } else {
    require_file(a.las, "standardization maps");
    run.input(a.las);
    LasMaps las = LasMaps::load(a.las);
    json model_overrides =
        user.contains("model") ? user.at("model") : json::object();
    // Model init streams are keyed separately from the shuffle seed.
    std::uint64_t model_seed = rng::derive_key(tc.seed, "model_init");
    if (!a.wrap_lon) model_overrides["wrap_longitude"] = false;
    if (a.f64)
      train_net_model<double>(id, m, las, tc, model_overrides, model_seed,
                              models_dir, run);
    else
      train_net_model<float>(id, m, las, tc, model_overrides, model_seed,
                             models_dir, run);
  }
  run.write(models_dir, "train_" + id.text + "_manifest.json");
  return 0;
}

struct EvalArgs {
  std::vector<std::string> models;
  std::string data;
  std::string las;
  std::string models_dir;
  std::string out;
  std::string split = "test";
  std::string region;
  bool area_weighted = false;
  bool dressed = false;
};

int cmd_eval(const EvalArgs& a) {
  if (a.models.empty()) throw std::invalid_argument("no models given");
  std::vector<eval::ModelId> ids;
  for (const std::string& s : a.models) ids.push_back(eval::parse_model_id(s));

  require_file(fs::path(a.data) / "manifest.json", "dataset manifest");
  DatasetManifest m = load_manifest(fs::path(a.data) / "manifest.json");
  for (const auto& id : ids)
    if (id.n_members > m.n_members)
      throw std::invalid_argument(id.text + " wants " +
                                  std::to_string(id.n_members) +
                                  " members, dataset has " +
                                  std::to_string(m.n_members));
  std::vector<EnsembleSample> samples = load_split(m, a.split);
  auto split = ptrs(samples);

  std::optional<LasMaps> las;
  bool needs_las = false;
  for (const auto& id : ids)
    needs_las |= id.kind == eval::ModelId::Kind::bias ||
                 id.kind == eval::ModelId::Kind::spread ||
                 id.kind == eval::ModelId::Kind::calibrated;
  if (needs_las) {
    require_file(a.las, "standardization maps (needed by net-backed ids)");
    las = LasMaps::load(a.las);
  }

  eval::EvalOptions opt;
  if (!a.region.empty())
    opt.region = eval::parse_region(a.region, m.grid_h, m.grid_w);
  opt.area_weighted = a.area_weighted;
  opt.dressed_ensembles = a.dressed;

  fs::create_directories(a.out);
  Manifest run("eval");
  run.j["split"] = a.split;
  run.j["models"] = a.models;
  run.j["region"] = a.region.empty() ? "global" : a.region;
  run.j["area_weighted"] = a.area_weighted;
  run.j["dressed_ensembles"] = a.dressed;
  run.input(fs::path(a.data) / "manifest.json");
  if (needs_las) run.input(a.las);

  const std::string region_name =
      a.region.empty() ? "global" : opt.region.name;

  // Reference ensembles for the skill table:each model's own E{n} plus the
  // full ensemble, always scored with the raw empirical CRPS.
  auto ref_crps = [&](int n) {
    eval::ModelId rid = eval::parse_model_id("E" + std::to_string(n));
    eval::EvalOptions ropt = opt;
    ropt.dressed_ensembles = false;
    eval::EvalResult r = eval::evaluate_model(
        eval::make_forecast_fn(rid, a.models_dir, nullptr), split, ropt);
    return eval::aggregate_value(r.rows, region_name, "crps");
  };

  std::vector<metrics::ScoreRow> skill_rows;
  for (const eval::ModelId& id : ids) {
    const LasMaps* maps = las ? &*las : nullptr;
    eval::ForecastFn fn = eval::make_forecast_fn(id, a.models_dir, maps);
    std::string art = eval::artifact_name(id);
    if (!art.empty()) run.input(fs::path(a.models_dir) / art);
    if (id.kind == eval::ModelId::Kind::calibrated)
      run.input(fs::path(a.models_dir) /
                ("B" + std::to_string(id.n_members) + ".ckpt"));
    eval::EvalResult res = eval::evaluate_model(fn, split, opt);
    metrics::write_score_csv(
        fs::path(a.out) / ("scores_" + id.text + ".csv"), res.rows);
    if (res.crps_map.size() != 0) {
      Grd1 g;
      g.h = static_cast<std::uint32_t>(res.crps_map.h);
      g.w = static_cast<std::uint32_t>(res.crps_map.w);
      g.c = 1;
      g.data.assign(res.crps_map.size(), 0.0f);
      grd1_set_channel(g, 0, res.crps_map);
      grd1_write(fs::path(a.out) / ("crps_" + id.text + ".grd"), g);

      const double crps = eval::aggregate_value(res.rows, region_name, "crps");
      skill_rows.push_back({-1, region_name, "crpss:" + id.text + "|E" +
                                                 std::to_string(id.n_members),
                            metrics::crpss(crps, ref_crps(id.n_members))});
      if (m.n_members != id.n_members)
        skill_rows.push_back({-1, region_name,
                              "crpss:" + id.text + "|E" +
                                  std::to_string(m.n_members),
                              metrics::crpss(crps, ref_crps(m.n_members))});
      std::cout << id.text << ": crps " << crps << "\n";
    } else {
      std::cout << id.text << ": scored (no probabilistic forecast)\n";
    }
  }
  if (!skill_rows.empty())
    metrics::write_score_csv(fs::path(a.out) / "crpss.csv", skill_rows);
  run.write(a.out, "eval_manifest.json");
  return 0;
}

struct CompareArgs {
  std::string id_a, id_b;
  std::string data;
  std::string las;
  std::string models_dir;
  std::string out;
  std::string split = "test";
  std::string region;
  bool area_weighted = false;
};

int cmd_compare(const CompareArgs& a) {
  eval::ModelId ida = eval::parse_model_id(a.id_a);
  eval::ModelId idb = eval::parse_model_id(a.id_b);

  require_file(fs::path(a.data) / "manifest.json", "dataset manifest");
  DatasetManifest m = load_manifest(fs::path(a.data) / "manifest.json");
  for (const auto& id : {ida, idb})
    if (id.n_members > m.n_members)
      throw std::invalid_argument(id.text + " wants " +
                                  std::to_string(id.n_members) +
                                  " members, dataset has " +
                                  std::to_string(m.n_members));
  std::vector<EnsembleSample> samples = load_split(m, a.split);
  auto split = ptrs(samples);

  std::optional<LasMaps> las;
  auto needs_las = [](const eval::ModelId& id) {
    return id.kind == eval::ModelId::Kind::bias ||
           id.kind == eval::ModelId::Kind::spread ||
           id.kind == eval::ModelId::Kind::calibrated;
  };
  if (needs_las(ida) || needs_las(idb)) {
    require_file(a.las, "standardization maps");
    las = LasMaps::load(a.las);
  }
  const LasMaps* maps = las ? &*las : nullptr;

  eval::EvalOptions opt;
  if (!a.region.empty())
    opt.region = eval::parse_region(a.region, m.grid_h, m.grid_w);
  opt.area_weighted = a.area_weighted;
  const std::string region_name =
      a.region.empty() ? "global" : opt.region.name;

  eval::EvalResult ra = eval::evaluate_model(
      eval::make_forecast_fn(ida, a.models_dir, maps), split, opt);
  eval::EvalResult rb = eval::evaluate_model(
      eval::make_forecast_fn(idb, a.models_dir, maps), split, opt);
  if (ra.crps_map.size() == 0 || rb.crps_map.size() == 0)
    throw std::invalid_argument(
        "compare needs two probabilistic models (E/B{n}U{n}C/EMOS ids)");

  GeoGrid diff = ra.crps_map;
  for (std::size_t p = 0; p < diff.size(); ++p)
    diff.values[p] -= rb.crps_map.values[p];

  fs::create_directories(a.out);
  Grd1 g;
  g.h = static_cast<std::uint32_t>(diff.h);
  g.w = static_cast<std::uint32_t>(diff.w);
  g.c = 1;
  g.data.assign(diff.size(), 0.0f);
  grd1_set_channel(g, 0, diff);
  const std::string stem = a.id_a + "_vs_" + a.id_b;
  grd1_write(fs::path(a.out) / (stem + ".grd"), g);

  const double ca = eval::aggregate_value(ra.rows, region_name, "crps");
  const double cb = eval::aggregate_value(rb.rows, region_name, "crps");
  json summary{{"model_a", a.id_a},
               {"model_b", a.id_b},
               {"region", region_name},
               {"crps_a", ca},
               {"crps_b", cb},
               {"crpss_a_vs_b", metrics::crpss(ca, cb)}};
  {
    std::ofstream os(fs::path(a.out) / (stem + "_summary.json"),
                     std::ios::binary);
    os << summary.dump(2) << '\n';
  }

  Manifest run("compare");
  run.j["summary"] = summary;
  run.j["split"] = a.split;
  run.input(fs::path(a.data) / "manifest.json");
  run.write(a.out, "compare_" + stem + "_manifest.json");
  std::cout << a.id_a << " crps " << ca << " | " << a.id_b << " crps " << cb
            << " | skill of a over b " << metrics::crpss(ca, cb) << "\n";
  return 0;
}

struct HeatmapArgs {
  std::string in;
  std::string out;
  int channel = 0;
  double limit = 0.0;
  int scale = 8;
};

int cmd_heatmap(const HeatmapArgs& a) {
  require_file(a.in, "input grid");
  Grd1 g = grd1_read(a.in);
  if (a.channel < 0 || static_cast<std::uint32_t>(a.channel) >= g.c)
    throw std::invalid_argument("channel " + std::to_string(a.channel) +
                                " out of range, file has " +
                                std::to_string(g.c));
  HeatmapOptions opt;
  opt.limit = a.limit;
  opt.scale = a.scale;
  fs::path out(a.out);
  if (out.has_parent_path()) fs::create_directories(out.parent_path());
  write_heatmap_ppm(out, grd1_channel_grid(g, static_cast<std::uint32_t>(a.channel)),
                    opt);
  std::cout << "wrote " << a.out << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"ensemble forecast post-processing toolkit"};
  app.require_subcommand(1);

  SynthArgs synth;
  auto* s_synth = app.add_subcommand("synth", "generate a synthetic dataset");
  s_synth->add_option("--out", synth.out, "output dataset directory")
      ->required();
  s_synth->add_option("--config", synth.config, "synthesis config JSON");
  s_synth->add_option("--seed", synth.seed, "seed override");

  LasFitArgs lasfit;
  auto* s_las = app.add_subcommand("las_fit", "fit standardization maps");
  s_las->add_option("--data", lasfit.data, "dataset directory")->required();
  s_las->add_option("--out", lasfit.out, "output maps file")->required();
  s_las->add_flag("--global", lasfit.global_stats,
                  "pooled scalar stats instead of local maps");
  s_las->add_option("--window", lasfit.window, "moving window size");
  s_las->add_option("--smooth-sigma", lasfit.sigma, "map smoothing sigma");
  s_las->add_option("--eps", lasfit.eps, "std map floor");

  TrainArgs tr;
  auto* s_train = app.add_subcommand("train", "train or fit one model id");
  s_train->add_option("--model", tr.model, "model id, e.g. B5, U5, B5U5C")
      ->required();
  s_train->add_option("--data", tr.data, "dataset directory")->required();
  s_train->add_option("--las", tr.las, "standardization maps file");
  s_train->add_option("--out", tr.out, "models output directory")->required();
  s_train->add_option("--config", tr.config,
                      "JSON with optional \"train\" and \"model\" overrides");
  s_train->add_option("--seed", tr.seed, "training seed override");
  s_train->add_flag("--f64", tr.f64, "train in double precision");
  s_train->add_flag("--paper-presets", tr.paper_presets,
                    "paper-scale step budgets instead of desk budgets");
  s_train->add_flag("--wrap-lon,!--no-wrap-lon", tr.wrap_lon,
                    "periodic longitude padding in convs (default on)");

  EvalArgs ev;
  auto* s_eval = app.add_subcommand("eval", "score model ids over a split");
  s_eval
      ->add_option("--models", ev.models,
                   "model ids (comma separated or repeated)")
      ->required()
      ->delimiter(',');
  s_eval->add_option("--data", ev.data, "dataset directory")->required();
  s_eval->add_option("--las", ev.las, "standardization maps file");
  s_eval->add_option("--models-dir", ev.models_dir, "trained models directory")
      ->required();
  s_eval->add_option("--out", ev.out, "scores output directory")->required();
  s_eval->add_option("--split", ev.split, "train|val|test (default test)");
  s_eval->add_option("--region", ev.region, "score box \"y0:y1,x0:x1\"");
  s_eval->add_flag("--area-weighted", ev.area_weighted,
                   "cos-latitude weighting");
  s_eval->add_flag("--dressed", ev.dressed,
                   "score raw ensembles as N(mean, spread)");

  CompareArgs cmp;
  auto* s_cmp = app.add_subcommand(
      "compare", "signed per-gridpoint CRPS difference of two models");
  s_cmp->add_option("id_a", cmp.id_a, "first model id")->required();
  s_cmp->add_option("id_b", cmp.id_b, "second model id")->required();
  s_cmp->add_option("--data", cmp.data, "dataset directory")->required();
  s_cmp->add_option("--las", cmp.las, "standardization maps file");
  s_cmp->add_option("--models-dir", cmp.models_dir,
                    "trained models directory");
  s_cmp->add_option("--out", cmp.out, "output directory")->required();
  s_cmp->add_option("--split", cmp.split, "train|val|test (default test)");
  s_cmp->add_option("--region", cmp.region, "score box \"y0:y1,x0:x1\"");
  s_cmp->add_flag("--area-weighted", cmp.area_weighted,
                  "cos-latitude weighting");

  HeatmapArgs hm;
  auto* s_hm = app.add_subcommand("heatmap", "render a grid channel to PPM");
  s_hm->add_option("--in", hm.in, "GRD1 input file")->required();
  s_hm->add_option("--out", hm.out, "PPM output file")->required();
  s_hm->add_option("--channel", hm.channel, "channel index (default 0)");
  s_hm->add_option("--limit", hm.limit,
                   "color saturation |value| (default: data max)");
  s_hm->add_option("--scale", hm.scale, "pixels per gridpoint (default 8)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : 1;  // help/version exit 0, bad usage exits 1
  }

  try {
    if (s_synth->parsed()) return cmd_synth(synth);
    if (s_las->parsed()) return cmd_las_fit(lasfit);
    if (s_train->parsed()) return cmd_train(tr);
    if (s_eval->parsed()) return cmd_eval(ev);
    if (s_cmp->parsed()) return cmd_compare(cmp);
    if (s_hm->parsed()) return cmd_heatmap(hm);
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "failure: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
