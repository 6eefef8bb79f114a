#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <random>

#include "enspost/preprocess.hpp"

using namespace enspost;

namespace {

GeoGrid random_grid(int h, int w, std::mt19937& rng, double lo = -1.0,
                    double hi = 1.0) {
  GeoGrid g(h, w);
  std::uniform_real_distribution<double> ud(lo, hi);
  for (double& v : g.values) v = ud(rng);
  return g;
}

double grid_mean(const GeoGrid& g) {
  double acc = 0.0;
  for (double v : g.values) acc += v;
  return acc / static_cast<double>(g.size());
}

}  // namespace

TEST_CASE("moving stats on a longitude ramp") {
  GeoGrid f(5, 7);
  for (int i = 0; i < f.h; ++i)
    for (int j = 0; j < f.w; ++j) f.at(i, j) = static_cast<double>(j);
  MovingStats ms = moving_stats(f, 3);
  REQUIRE(ms.mean.h == 3);
  REQUIRE(ms.mean.w == 5);
  for (int i = 0; i < ms.mean.h; ++i)
    for (int j = 0; j < ms.mean.w; ++j) {
      CHECK(ms.mean.at(i, j) == doctest::Approx(j + 1.0).epsilon(1e-12));
      CHECK(ms.std.at(i, j) == doctest::Approx(std::sqrt(2.0 / 3.0)).epsilon(1e-12));
    }
}

TEST_CASE("moving stats against a direct window scan") {
  std::mt19937 rng(42);
  GeoGrid f = random_grid(9, 9, rng);
  int k = 7;
  MovingStats ms = moving_stats(f, k);
  REQUIRE(ms.mean.h == 3);
  REQUIRE(ms.mean.w == 3);
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) {
      double s1 = 0.0, s2 = 0.0;
      for (int a = 0; a < k; ++a)
        for (int b = 0; b < k; ++b) {
          double v = f.at(i + a, j + b);
          s1 += v;
          s2 += v * v;
        }
      double m = s1 / (k * k);
      double sd = std::sqrt(s2 / (k * k) - m * m);
      CHECK(ms.mean.at(i, j) == doctest::Approx(m).epsilon(1e-12));
      CHECK(ms.std.at(i, j) == doctest::Approx(sd).epsilon(1e-10));
    }
}

TEST_CASE("moving stats rejects bad windows") {
  GeoGrid f(4, 4, 1.0);
  CHECK_THROWS_AS(moving_stats(f, 0), std::invalid_argument);
  CHECK_THROWS_AS(moving_stats(f, 5), std::invalid_argument);
  CHECK_THROWS_AS(moving_stats(f, 4), std::invalid_argument);  // even window
  CHECK_NOTHROW(moving_stats(f, 3));
}

TEST_CASE("pad_geo wraps longitude and replicates latitude") {
  GeoGrid f(2, 2);
  double a = 1.0, b = 2.0, c = 3.0, d = 4.0;
  f.at(0, 0) = a;
  f.at(0, 1) = b;
  f.at(1, 0) = c;
  f.at(1, 1) = d;

  GeoGrid lon = pad_geo(f, 2, 4);
  double want_lon[2][4] = {{b, a, b, a}, {d, c, d, c}};
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 4; ++j) CHECK(lon.at(i, j) == want_lon[i][j]);

  GeoGrid lat = pad_geo(f, 4, 2);
  double want_lat[4][2] = {{a, b}, {a, b}, {c, d}, {c, d}};
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 2; ++j) CHECK(lat.at(i, j) == want_lat[i][j]);

  // Odd leftover padding lands on the high side.
  GeoGrid odd_lat = pad_geo(f, 3, 2);
  CHECK(odd_lat.at(0, 0) == a);
  CHECK(odd_lat.at(2, 0) == c);
  GeoGrid odd_lon = pad_geo(f, 2, 3);
  CHECK(odd_lon.at(0, 0) == a);
  CHECK(odd_lon.at(0, 2) == a);

  CHECK_THROWS_AS(pad_geo(f, 1, 2), std::invalid_argument);
  CHECK_THROWS_AS(pad_geo(f, 2, 1), std::invalid_argument);
}

TEST_CASE("pad_geo wrap is periodic for wide targets") {
  std::mt19937 rng(3);
  GeoGrid f = random_grid(3, 4, rng);
  GeoGrid p = pad_geo(f, 3, 12);
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j + 4 < 12; ++j) CHECK(p.at(i, j) == p.at(i, j + 4));
}

TEST_CASE("gaussian smoothing of a unit impulse") {
  GeoGrid f(11, 11, 0.0);
  f.at(5, 5) = 1.0;
  GeoGrid s = gaussian_smooth(f, 1.0, 4.0);
  // Separable truncated kernel, radius 4: the center weight of one pass is
  // 1 / (1 + 2 (e^-1/2 + e^-2 + e^-9/2 + e^-8)).
  double w0 = 1.0 / (1.0 + 2.0 * (std::exp(-0.5) + std::exp(-2.0) +
                                  std::exp(-4.5) + std::exp(-8.0)));
  CHECK(s.at(5, 5) == doctest::Approx(w0 * w0).epsilon(1e-12));
  CHECK(s.at(5, 5) == doctest::Approx(0.1592).epsilon(1e-3));
  CHECK_THROWS_AS(gaussian_smooth(f, 0.0), std::invalid_argument);
}

TEST_CASE("gaussian smoothing preserves the mean along the wrap axis") {
  // Rows identical, so the latitude pass is the identity and the wrap pass
  // is a convex combination per row.
  std::mt19937 rng(9);
  GeoGrid f(6, 16);
  std::uniform_real_distribution<double> ud(-2.0, 2.0);
  for (int j = 0; j < f.w; ++j) {
    double v = ud(rng);
    for (int i = 0; i < f.h; ++i) f.at(i, j) = v;
  }
  double before = grid_mean(f);
  GeoGrid s = gaussian_smooth(f, 3.0, 4.0);
  CHECK(std::abs(grid_mean(s) - before) < 1e-6);
}

TEST_CASE("gaussian smoothing keeps constants constant") {
  GeoGrid f(8, 8, 2.75);
  GeoGrid s = gaussian_smooth(f, 10.0, 4.0);
  for (double v : s.values) CHECK(v == doctest::Approx(2.75).epsilon(1e-12));
}

TEST_CASE("stats then pad then smooth lands back on raw dims") {
  std::mt19937 rng(11);
  GeoGrid f = random_grid(12, 20, rng);
  MovingStats ms = moving_stats(f, 7);
  GeoGrid padded = pad_geo(ms.std, f.h, f.w);
  GeoGrid smoothed = gaussian_smooth(padded, 10.0, 4.0);
  CHECK(smoothed.h == f.h);
  CHECK(smoothed.w == f.w);
}

TEST_CASE("constant training fields give eps-floored std maps") {
  LasConfig cfg;
  cfg.window = 5;
  GeoGrid f(10, 12, 3.25);
  LasMaps maps = LasMaps::fit({&f, &f, &f}, cfg);
  for (double v : maps.std_map().values) CHECK(v == cfg.eps);
  for (double v : maps.mean_map().values) CHECK(v == doctest::Approx(3.25).epsilon(1e-9));
}

TEST_CASE("standardize then destandardize returns the field") {
  std::mt19937 rng(17);
  LasConfig cfg;
  cfg.window = 5;
  std::vector<GeoGrid> train;
  for (int t = 0; t < 8; ++t) train.push_back(random_grid(10, 16, rng, -2.0, 5.0));
  std::vector<const GeoGrid*> ptrs;
  for (const GeoGrid& g : train) ptrs.push_back(&g);
  LasMaps maps = LasMaps::fit(ptrs, cfg);

  GeoGrid f = random_grid(10, 16, rng, -2.0, 5.0);
  GeoGrid round = maps.destandardize(maps.standardize(f));
  for (std::size_t i = 0; i < f.size(); ++i)
    CHECK(std::abs(round.values[i] - f.values[i]) < 1e-5);

  GeoGrid round2 = maps.unscale(maps.scale_only(f));
  for (std::size_t i = 0; i < f.size(); ++i)
    CHECK(std::abs(round2.values[i] - f.values[i]) < 1e-5);
}

TEST_CASE("standardized fields have near-unit local spread") {
  // Noise whose amplitude grows with latitude; after fitting, a held-out
  // field standardizes to roughly unit variance in every window.
  std::mt19937 rng(23);
  std::normal_distribution<double> nd(0.0, 1.0);
  int h = 32, w = 64;
  auto make_field = [&]() {
    GeoGrid g(h, w);
    for (int i = 0; i < h; ++i) {
      double amp = 0.5 + 2.0 * i / (h - 1.0);
      for (int j = 0; j < w; ++j) g.at(i, j) = amp * nd(rng);
    }
    return g;
  };
  LasConfig cfg;
  cfg.window = 7;
  cfg.sigma = 2.0;  // keep the maps local enough to track the amplitude ramp
  LasMaps::Fitter fitter;
  for (int t = 0; t < 60; ++t) fitter.add(make_field());
  LasMaps maps = fitter.finish(cfg);

  GeoGrid held_out = maps.standardize(make_field());
  MovingStats ms = moving_stats(held_out, 7);
  int in_range = 0, total = 0;
  for (double s : ms.std.values) {
    in_range += (s >= 0.5 && s <= 2.0) ? 1 : 0;
    ++total;
  }
  CHECK(static_cast<double>(in_range) / total >= 0.95);
}

TEST_CASE("global stats mode produces constant maps") {
  std::mt19937 rng(31);
  std::vector<GeoGrid> train;
  for (int t = 0; t < 4; ++t) train.push_back(random_grid(6, 8, rng, 1.0, 3.0));
  double s1 = 0.0, s2 = 0.0;
  long long n = 0;
  for (const GeoGrid& g : train)
    for (double v : g.values) {
      s1 += v;
      s2 += v * v;
      ++n;
    }
  double mean = s1 / n;
  double sd = std::sqrt(s2 / n - mean * mean);

  LasConfig cfg;
  cfg.global_stats = true;
  std::vector<const GeoGrid*> ptrs;
  for (const GeoGrid& g : train) ptrs.push_back(&g);
  LasMaps maps = LasMaps::fit(ptrs, cfg);
  for (double v : maps.mean_map().values) CHECK(v == doctest::Approx(mean).epsilon(1e-12));
  for (double v : maps.std_map().values) CHECK(v == doctest::Approx(sd).epsilon(1e-12));
}

TEST_CASE("global stats mode works when the window would not fit") {
  GeoGrid tiny(3, 3, 1.0);
  LasConfig cfg;  // window 7 > 3
  CHECK_THROWS_AS(LasMaps::fit({&tiny}, cfg), std::invalid_argument);
  cfg.global_stats = true;
  CHECK_NOTHROW(LasMaps::fit({&tiny}, cfg));
}

TEST_CASE("las maps save and load bit-exactly") {
  std::mt19937 rng(37);
  LasConfig cfg;
  cfg.window = 5;
  cfg.sigma = 4.0;
  cfg.eps = 2e-3;
  std::vector<GeoGrid> train;
  for (int t = 0; t < 5; ++t) train.push_back(random_grid(9, 14, rng));
  std::vector<const GeoGrid*> ptrs;
  for (const GeoGrid& g : train) ptrs.push_back(&g);
  LasMaps maps = LasMaps::fit(ptrs, cfg);

  auto path = std::filesystem::temp_directory_path() / "enspost_las_test.bin";
  maps.save(path);
  LasMaps back = LasMaps::load(path);
  std::filesystem::remove(path);

  REQUIRE(back.mean_map().size() == maps.mean_map().size());
  for (std::size_t i = 0; i < maps.mean_map().size(); ++i) {
    CHECK(back.mean_map().values[i] == maps.mean_map().values[i]);
    CHECK(back.std_map().values[i] == maps.std_map().values[i]);
  }
  CHECK(back.config().window == cfg.window);
  CHECK(back.config().sigma == cfg.sigma);
  CHECK(back.config().truncate == cfg.truncate);
  CHECK(back.config().eps == cfg.eps);
  CHECK(back.config().global_stats == cfg.global_stats);
}

TEST_CASE("fitter rejects inconsistent input") {
  LasMaps::Fitter fitter;
  CHECK_THROWS_AS(fitter.finish(LasConfig{}), std::logic_error);
  fitter.add(GeoGrid(4, 4, 1.0));
  CHECK_THROWS_AS(fitter.add(GeoGrid(4, 5, 1.0)), std::invalid_argument);
}

TEST_CASE("refitting on different data changes the maps") {
  // Guards against accidental leakage: evaluation reuses frozen maps, and a
  // fit on other dates cannot silently produce the same maps.
  std::mt19937 rng(41);
  std::vector<GeoGrid> train, test;
  for (int t = 0; t < 6; ++t) train.push_back(random_grid(10, 16, rng));
  for (int t = 0; t < 6; ++t) test.push_back(random_grid(10, 16, rng, 0.5, 2.0));
  auto ptrs = [](const std::vector<GeoGrid>& v) {
    std::vector<const GeoGrid*> p;
    for (const GeoGrid& g : v) p.push_back(&g);
    return p;
  };
  LasConfig cfg;
  cfg.window = 5;
  LasMaps on_train = LasMaps::fit(ptrs(train), cfg);
  LasMaps on_test = LasMaps::fit(ptrs(test), cfg);
  double max_diff = 0.0;
  for (std::size_t i = 0; i < on_train.mean_map().size(); ++i)
    max_diff = std::max(max_diff, std::abs(on_train.mean_map().values[i] -
                                           on_test.mean_map().values[i]));
  CHECK(max_diff > 1e-3);
}

TEST_CASE("standardize checks dims") {
  GeoGrid f(8, 8, 1.0);
  LasConfig cfg;
  cfg.window = 3;
  LasMaps maps = LasMaps::fit({&f}, cfg);
  GeoGrid wrong(4, 4, 1.0);
  CHECK_THROWS_AS(maps.standardize(wrong), std::invalid_argument);
  CHECK_THROWS_AS(maps.destandardize(wrong), std::invalid_argument);
  CHECK_THROWS_AS(maps.scale_only(wrong), std::invalid_argument);
}
