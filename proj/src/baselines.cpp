#include "enspost/baselines.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <stdexcept>

#include <json.hpp>

#include "enspost/metrics.hpp"
#include "enspost/models.hpp"
#include "enspost/rng.hpp"

namespace enspost::baselines {

using nlohmann::json;

const char* lin_target_name(LinTarget t) {
  return t == LinTarget::mean ? "mean" : "spread";
}

LinTarget lin_target_from_name(const std::string& s) {
  if (s == "mean") return LinTarget::mean;
  if (s == "spread") return LinTarget::spread;
  throw std::invalid_argument("unknown regression target '" + s + "'");
}

namespace {

// In-place LL^T factorization and solve. Returns false when a pivot
// collapses relative to the original diagonal, which is how rank deficiency
// (e.g. constant members making columns collinear) shows up here.
bool cholesky_solve(std::vector<double>& a, std::vector<double>& rhs, int n) {
  std::vector<double> orig_diag(static_cast<std::size_t>(n));
  for (int j = 0; j < n; ++j) orig_diag[j] = a[j * n + j];
  for (int j = 0; j < n; ++j) {
    double diag = a[j * n + j];
    for (int k = 0; k < j; ++k) diag -= a[j * n + k] * a[j * n + k];
    if (!(diag > 1e-10 * (orig_diag[j] + 1e-30))) return false;
    const double l = std::sqrt(diag);
    a[j * n + j] = l;
    for (int i = j + 1; i < n; ++i) {
      double v = a[i * n + j];
      for (int k = 0; k < j; ++k) v -= a[i * n + k] * a[j * n + k];
      a[i * n + j] = v / l;
    }
  }
  for (int i = 0; i < n; ++i) {
    double v = rhs[i];
    for (int k = 0; k < i; ++k) v -= a[i * n + k] * rhs[k];
    rhs[i] = v / a[i * n + i];
  }
  for (int i = n - 1; i >= 0; --i) {
    double v = rhs[i];
    for (int k = i + 1; k < n; ++k) v -= a[k * n + i] * rhs[k];
    rhs[i] = v / a[i * n + i];
  }
  return true;
}

}  // namespace

GeoGrid LinRegModel::predict(const std::vector<GeoGrid>& members) const {
  if (static_cast<int>(members.size()) < n_members)
    throw std::invalid_argument("linreg predict: not enough member grids");
  for (int m = 0; m < n_members; ++m)
    if (members[m].h != h || members[m].w != w)
      throw std::invalid_argument("linreg predict: grid size mismatch");
  GeoGrid out(h, w);
  out.field_id = members[0].field_id;
  out.units = members[0].units;
  for (std::size_t i = 0; i < out.size(); ++i) {
    double v = coef[static_cast<std::size_t>(n_members)].values[i];
    for (int m = 0; m < n_members; ++m)
      v += coef[static_cast<std::size_t>(m)].values[i] * members[m].values[i];
    out.values[i] = v;
  }
  return out;
}

GeoGrid LinRegModel::predict(const EnsembleSample& s) const {
  return predict(s.members[2]);
}

LinRegModel linreg_fit(const std::vector<const EnsembleSample*>& samples,
                       LinTarget target, int n_members, bool ridge_fallback) {
  if (n_members < 1) throw std::invalid_argument("linreg_fit: n_members >= 1");
  if (static_cast<int>(samples.size()) < n_members + 2)
    throw std::invalid_argument("linreg_fit: needs at least n_members + 2 "
                                "samples");
  const GeoGrid& proto = samples[0]->ground_truth;
  const int h = proto.h, w = proto.w;
  for (const EnsembleSample* s : samples) {
    if (static_cast<int>(s->members[2].size()) < n_members)
      throw std::invalid_argument("linreg_fit: not enough 48 h members");
    if (s->ground_truth.h != h || s->ground_truth.w != w)
      throw std::invalid_argument("linreg_fit: grid size mismatch");
  }

  LinRegModel model;
  model.h = h;
  model.w = w;
  model.n_members = n_members;
  model.target = target;
  model.coef.assign(static_cast<std::size_t>(n_members) + 1, GeoGrid(h, w));
  for (auto& g : model.coef) {
    g.field_id = proto.field_id;
    g.units = proto.units;
  }

  const int dim = n_members + 1;
  std::vector<double> gram(static_cast<std::size_t>(dim) * dim);
  std::vector<double> rhs(static_cast<std::size_t>(dim));
  std::vector<double> row(static_cast<std::size_t>(dim));

  for (int i = 0; i < h * w; ++i) {
    std::fill(gram.begin(), gram.end(), 0.0);
    std::fill(rhs.begin(), rhs.end(), 0.0);
    for (const EnsembleSample* s : samples) {
      for (int m = 0; m < n_members; ++m)
        row[static_cast<std::size_t>(m)] = s->members[2][static_cast<std::size_t>(m)].values[static_cast<std::size_t>(i)];
      row[static_cast<std::size_t>(n_members)] = 1.0;
      const double y = target == LinTarget::mean
                           ? s->ground_truth.values[static_cast<std::size_t>(i)]
                           : s->spread[2].values[static_cast<std::size_t>(i)];
      for (int j = 0; j < dim; ++j) {
        for (int k = 0; k <= j; ++k) gram[j * dim + k] += row[j] * row[k];
        rhs[static_cast<std::size_t>(j)] += row[static_cast<std::size_t>(j)] * y;
      }
    }
    for (int j = 0; j < dim; ++j)
      for (int k = j + 1; k < dim; ++k) gram[j * dim + k] = gram[k * dim + j];

    std::vector<double> a = gram;
    std::vector<double> beta = rhs;
    if (!cholesky_solve(a, beta, dim)) {
      if (!ridge_fallback)
        throw std::runtime_error(
            "linreg_fit: rank-deficient design at gridpoint (" +
            std::to_string(i / w) + "," + std::to_string(i % w) +
            ") and ridge fallback disabled");
      a = gram;
      beta = rhs;
      for (int j = 0; j < dim; ++j) a[j * dim + j] += kLinRegRidge;
      if (!cholesky_solve(a, beta, dim))
        throw std::runtime_error(
            "linreg_fit: singular system at gridpoint (" +
            std::to_string(i / w) + "," + std::to_string(i % w) + ")");
    }
    for (int j = 0; j < dim; ++j)
      model.coef[static_cast<std::size_t>(j)].values[static_cast<std::size_t>(i)] = beta[static_cast<std::size_t>(j)];
  }
  return model;
}

void save_linreg(const std::filesystem::path& path, const LinRegModel& m) {
  Grd1 g;
  g.h = static_cast<std::uint32_t>(m.h);
  g.w = static_cast<std::uint32_t>(m.w);
  g.c = static_cast<std::uint32_t>(m.n_members + 1);
  g.data.assign(static_cast<std::size_t>(g.c) * g.h * g.w, 0.0f);
  for (int ci = 0; ci <= m.n_members; ++ci)
    grd1_set_channel(g, static_cast<std::uint32_t>(ci),
                     m.coef[static_cast<std::size_t>(ci)]);
  grd1_write(path, g);

  json j;
  j["target"] = lin_target_name(m.target);
  j["n_members"] = m.n_members;
  std::ofstream os(path.string() + ".json");
  os << j.dump(2) << '\n';
  if (!os) throw std::runtime_error("cannot write " + path.string() + ".json");
}

LinRegModel load_linreg(const std::filesystem::path& path) {
  Grd1 g = grd1_read(path);
  std::ifstream is(path.string() + ".json");
  if (!is)
    throw std::runtime_error("missing sidecar " + path.string() + ".json");
  json j = json::parse(is);

  LinRegModel m;
  m.h = static_cast<int>(g.h);
  m.w = static_cast<int>(g.w);
  m.n_members = j.at("n_members").get<int>();
  m.target = lin_target_from_name(j.at("target").get<std::string>());
  if (g.c != static_cast<std::uint32_t>(m.n_members + 1))
    throw std::runtime_error("linreg stack has " + std::to_string(g.c) +
                             " channels, expected " +
                             std::to_string(m.n_members + 1));
  for (std::uint32_t ci = 0; ci < g.c; ++ci)
    m.coef.push_back(grd1_channel_grid(g, ci));
  return m;
}

void EmosModel::predict_point(const double* members, double* mu,
                              double* sigma) const {
  double mu_v = a;
  double s1 = 0.0;
  for (int i = 0; i < 5; ++i) {
    mu_v += b[static_cast<std::size_t>(i)] * members[i];
    s1 += members[i];
  }
  const double mean = s1 / 5.0;
  double s2 = 0.0;
  for (int i = 0; i < 5; ++i) {
    const double d0 = members[i] - mean;
    s2 += d0 * d0;
  }
  s2 /= 4.0;  // sample variance, matching the spread channels
  *mu = mu_v;
  *sigma = std::sqrt(std::max(c * c + d * d * s2, 1e-24));
}

void EmosModel::predict(const EnsembleSample& s, GeoGrid* mu,
                        GeoGrid* sigma) const {
  if (s.members[2].size() < 5)
    throw std::invalid_argument("emos predict: needs 5 members at 48 h");
  const GeoGrid& proto = s.members[2][0];
  *mu = GeoGrid(proto.h, proto.w);
  *sigma = GeoGrid(proto.h, proto.w);
  mu->field_id = sigma->field_id = proto.field_id;
  mu->units = sigma->units = proto.units;
  double m[5];
  for (std::size_t i = 0; i < proto.size(); ++i) {
    for (int k = 0; k < 5; ++k)
      m[k] = s.members[2][static_cast<std::size_t>(k)].values[i];
    predict_point(m, &mu->values[i], &sigma->values[i]);
  }
}

std::string EmosModel::to_json() const {
  json j;
  j["a"] = a;
  j["b"] = b;
  j["c"] = c;
  j["d"] = d;
  return j.dump(2);
}

EmosModel EmosModel::from_json(const std::string& text) {
  json j = json::parse(text);
  EmosModel m;
  m.a = j.at("a").get<double>();
  auto bv = j.at("b").get<std::vector<double>>();
  if (bv.size() != 5)
    throw std::invalid_argument("emos json: b must have 5 weights");
  std::copy(bv.begin(), bv.end(), m.b.begin());
  m.c = j.at("c").get<double>();
  m.d = j.at("d").get<double>();
  return m;
}

void save_emos(const std::filesystem::path& path, const EmosModel& m) {
  std::ofstream os(path);
  os << m.to_json() << '\n';
  if (!os) throw std::runtime_error("cannot write " + path.string());
}

EmosModel load_emos(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot read " + path.string());
  std::string text((std::istreambuf_iterator<char>(is)),
                   std::istreambuf_iterator<char>());
  return EmosModel::from_json(text);
}

std::vector<EmosDate> emos_dates(
    const std::vector<const EnsembleSample*>& samples) {
  std::vector<EmosDate> out;
  out.reserve(samples.size());
  for (const EnsembleSample* s : samples) {
    if (s->members[2].size() < 5)
      throw std::invalid_argument("emos_dates: needs 5 members at 48 h");
    EmosDate d;
    const std::size_t hw = s->ground_truth.size();
    d.x.resize(hw);
    d.y.resize(hw);
    for (std::size_t i = 0; i < hw; ++i) {
      for (int k = 0; k < 5; ++k)
        d.x[i][static_cast<std::size_t>(k)] =
            s->members[2][static_cast<std::size_t>(k)].values[i];
      d.y[i] = s->ground_truth.values[i];
    }
    out.push_back(std::move(d));
  }
  return out;
}

namespace {

struct EmosGrad {
  double loss = 0.0;
  double a = 0.0;
  std::array<double, 5> b{};
  double c = 0.0, d = 0.0;
  std::size_t points = 0;

  bool finite() const {
    double all = loss + a + c + d;
    for (double v : b) all += v;
    return std::isfinite(all);
  }
};

// Mean CRPS and its parameter gradient over a set of dates. The sigma
// parameters chain through sigma = sqrt(c^2 + d^2 S^2):
// d sigma / d c = c / sigma, d sigma / d d = d S^2 / sigma.
EmosGrad emos_pass(const EmosModel& m, const std::vector<const EmosDate*>& dates,
                   bool want_grad) {
  EmosGrad g;
  for (const EmosDate* date : dates) {
    for (std::size_t i = 0; i < date->x.size(); ++i) {
      const double* x = date->x[i].data();
      double mu, sigma;
      m.predict_point(x, &mu, &sigma);
      if (!want_grad) {
        g.loss += metrics::crps_gaussian(mu, sigma, date->y[i]);
      } else {
        double dmu, dsigma;
        g.loss += metrics::crps_gaussian_grad(mu, sigma, date->y[i], &dmu,
                                              &dsigma);
        g.a += dmu;
        for (int k = 0; k < 5; ++k) g.b[static_cast<std::size_t>(k)] += dmu * x[k];
        double s1 = 0.0;
        for (int k = 0; k < 5; ++k) s1 += x[k];
        const double mean = s1 / 5.0;
        double s2 = 0.0;
        for (int k = 0; k < 5; ++k) s2 += (x[k] - mean) * (x[k] - mean);
        s2 /= 4.0;
        g.c += dsigma * m.c / sigma;
        g.d += dsigma * m.d * s2 / sigma;
      }
      ++g.points;
    }
  }
  const double inv = 1.0 / static_cast<double>(g.points);
  g.loss *= inv;
  g.a *= inv;
  for (double& v : g.b) v *= inv;
  g.c *= inv;
  g.d *= inv;
  return g;
}

}  // namespace

EmosModel emos_fit(const std::vector<EmosDate>& train_set,
                   const std::vector<EmosDate>& val_set,
                   const train::TrainConfig& cfg,
                   train::TrainResult* result) {
  cfg.validate();
  if (cfg.loss != train::Loss::crps)
    throw std::invalid_argument("emos_fit: loss must be crps");
  if (train_set.empty() || val_set.empty())
    throw std::invalid_argument("emos_fit: empty split");

  EmosModel model;  // default-initialized parameters are the fit's start
  nn::ParamStore<double> store(0);
  nn::Tensor<double> pa = store.param("a", {1, 1, 1, 1}, nn::Init::constant,
                                      model.a);
  nn::Tensor<double> pb = store.param("b", {1, 5, 1, 1}, nn::Init::constant,
                                      model.b[0]);
  nn::Tensor<double> pc = store.param("c", {1, 1, 1, 1}, nn::Init::constant,
                                      model.c);
  nn::Tensor<double> pd = store.param("d", {1, 1, 1, 1}, nn::Init::constant,
                                      model.d);

  auto to_model = [&]() {
    EmosModel m;
    m.a = pa.values()[0];
    for (int k = 0; k < 5; ++k) m.b[static_cast<std::size_t>(k)] = pb.values()[static_cast<std::size_t>(k)];
    m.c = pc.values()[0];
    m.d = pd.values()[0];
    return m;
  };

  std::vector<const EmosDate*> val_ptrs, all_train;
  for (const auto& d : val_set) val_ptrs.push_back(&d);
  for (const auto& d : train_set) all_train.push_back(&d);

  train::TrainResult res;
  train::EarlyStopper stopper(cfg.early_stop_patience);
  const double val0 = emos_pass(to_model(), val_ptrs, false).loss;
  res.history.push_back({0, emos_pass(to_model(), all_train, false).loss, val0});
  stopper.observe(0, val0);
  EmosModel best = to_model();
  res.best_step = 0;

  train::Adam<double> adam(&store, train::AdamConfig{.lr = cfg.lr});
  std::vector<int> order;
  std::size_t cursor = 0;
  int epoch = 0;
  double run_sum = 0.0;
  int run_count = 0;
  int step = 0;
  bool diverged = false;
  while (step < cfg.max_steps && !diverged) {
    if (cursor >= order.size()) {
      order.resize(train_set.size());
      std::iota(order.begin(), order.end(), 0);
      rng::Stream s(rng::derive_key(cfg.seed, "shuffle",
                                    static_cast<std::uint64_t>(epoch)));
      for (int i = static_cast<int>(order.size()) - 1; i > 0; --i) {
        const int j = static_cast<int>(s.next_u64() %
                                       static_cast<std::uint64_t>(i + 1));
        std::swap(order[static_cast<std::size_t>(i)], order[static_cast<std::size_t>(j)]);
      }
      ++epoch;
      cursor = 0;
    }
    std::vector<const EmosDate*> batch;
    for (int i = 0; i < cfg.batch_size && cursor < order.size(); ++i, ++cursor)
      batch.push_back(&train_set[static_cast<std::size_t>(order[cursor])]);

    const EmosModel cur = to_model();
    EmosGrad g = emos_pass(cur, batch, true);
    if (!g.finite()) {
      diverged = true;  // keep the last good parameters
      break;
    }
    pa.grad()[0] = g.a;
    for (int k = 0; k < 5; ++k) pb.grad()[static_cast<std::size_t>(k)] = g.b[static_cast<std::size_t>(k)];
    pc.grad()[0] = g.c;
    pd.grad()[0] = g.d;
    adam.step();
    store.zero_grad();
    ++step;
    run_sum += g.loss;
    ++run_count;

    if (step % cfg.eval_every == 0 || step == cfg.max_steps) {
      const double val = emos_pass(to_model(), val_ptrs, false).loss;
      res.history.push_back({step, run_sum / run_count, val});
      run_sum = 0.0;
      run_count = 0;
      if (stopper.observe(step, val)) {
        best = to_model();
        res.best_step = step;
      }
      if (stopper.should_stop()) break;
    }
  }

  res.steps_run = step;
  res.best_val_loss = stopper.best_value();
  if (result) *result = res;
  return best;
}

}  // namespace enspost::baselines
