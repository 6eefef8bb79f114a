#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>
#include <cstring>
#include <random>
#include <vector>

#include "doctest.h"
#include "enspost/kernels.hpp"

using enspost::kernels::Backend;
using enspost::kernels::KernelTable;

namespace {

// Sizes straddling the SIMD widths (8 floats / 4 doubles) and their tails.
const std::vector<std::size_t> kSizes = {1, 2, 3, 4, 5, 7, 8, 9,
                                         15, 16, 17, 31, 32, 33, 67};

template <typename T>
std::vector<T> random_vec(std::size_t n, unsigned seed, T lo = T(-2),
                          T hi = T(2)) {
  std::mt19937 rng(seed);
  std::uniform_real_distribution<double> dist(lo, hi);
  std::vector<T> v(n);
  for (auto& x : v) x = static_cast<T>(dist(rng));
  return v;
}

template <typename T>
bool bitwise_equal(const std::vector<T>& a, const std::vector<T>& b) {
  return a.size() == b.size() &&
         std::memcmp(a.data(), b.data(), a.size() * sizeof(T)) == 0;
}

template <typename T>
void check_close(T a, T b, double rel) {
  const double denom = std::max({std::abs(double(a)), std::abs(double(b)), 1.0});
  CHECK(std::abs(double(a) - double(b)) / denom < rel);
}

}  // namespace

TEST_CASE("backend names and support") {
  CHECK(std::string(enspost::kernels::backend_name(Backend::scalar)) ==
        "scalar");
  CHECK(std::string(enspost::kernels::backend_name(Backend::avx2)) == "avx2");
  CHECK(enspost::kernels::backend_supported(Backend::scalar));
}

TEST_CASE("set_active_backend round trip") {
  const Backend before = enspost::kernels::active_backend();
  enspost::kernels::set_active_backend(Backend::scalar);
  CHECK(enspost::kernels::active_backend() == Backend::scalar);
  if (enspost::kernels::backend_supported(Backend::avx2)) {
    enspost::kernels::set_active_backend(Backend::avx2);
    CHECK(enspost::kernels::active_backend() == Backend::avx2);
  }
  enspost::kernels::set_active_backend(before);
}

TEST_CASE_TEMPLATE("elementwise kernels agree bitwise across backends", T,
                   float, double) {
  if (!enspost::kernels::backend_supported(Backend::avx2)) return;
  const auto& ks = enspost::kernels::table<T>(Backend::scalar);
  const auto& kv = enspost::kernels::table<T>(Backend::avx2);

  unsigned seed = 100;
  for (std::size_t n : kSizes) {
    auto a = random_vec<T>(n, seed++);
    auto b = random_vec<T>(n, seed++, T(0.5), T(2));  // divisor away from 0
    std::vector<T> o1(n), o2(n);

    ks.add(a.data(), b.data(), o1.data(), n);
    kv.add(a.data(), b.data(), o2.data(), n);
    CHECK(bitwise_equal(o1, o2));

    ks.sub(a.data(), b.data(), o1.data(), n);
    kv.sub(a.data(), b.data(), o2.data(), n);
    CHECK(bitwise_equal(o1, o2));

    ks.mul(a.data(), b.data(), o1.data(), n);
    kv.mul(a.data(), b.data(), o2.data(), n);
    CHECK(bitwise_equal(o1, o2));

    ks.div(a.data(), b.data(), o1.data(), n);
    kv.div(a.data(), b.data(), o2.data(), n);
    CHECK(bitwise_equal(o1, o2));

    ks.relu(a.data(), o1.data(), n);
    kv.relu(a.data(), o2.data(), n);
    CHECK(bitwise_equal(o1, o2));

    std::vector<T> y1 = b, y2 = b;
    ks.scale(T(1.5), y1.data(), n);
    kv.scale(T(1.5), y2.data(), n);
    CHECK(bitwise_equal(y1, y2));
  }
}

TEST_CASE_TEMPLATE("fused kernels agree within tolerance across backends", T,
                   float, double) {
  // axpy/affine/relu_mask_add use FMA on the AVX2 path, so results can
  // differ in the last bits from the unfused scalar loop.
  if (!enspost::kernels::backend_supported(Backend::avx2)) return;
  const auto& ks = enspost::kernels::table<T>(Backend::scalar);
  const auto& kv = enspost::kernels::table<T>(Backend::avx2);
  const double rel = sizeof(T) == 4 ? 1e-6 : 1e-14;

  unsigned seed = 300;
  for (std::size_t n : kSizes) {
    auto x = random_vec<T>(n, seed++);
    auto y0 = random_vec<T>(n, seed++);
    auto dy = random_vec<T>(n, seed++);

    std::vector<T> y1 = y0, y2 = y0;
    ks.axpy(T(0.7), x.data(), y1.data(), n);
    kv.axpy(T(0.7), x.data(), y2.data(), n);
    for (std::size_t i = 0; i < n; ++i) check_close(y1[i], y2[i], rel);

    std::vector<T> o1(n), o2(n);
    ks.affine(T(1.3), T(-0.2), x.data(), o1.data(), n);
    kv.affine(T(1.3), T(-0.2), x.data(), o2.data(), n);
    for (std::size_t i = 0; i < n; ++i) check_close(o1[i], o2[i], rel);

    std::vector<T> d1 = y0, d2 = y0;
    ks.relu_mask_add(x.data(), dy.data(), d1.data(), n);
    kv.relu_mask_add(x.data(), dy.data(), d2.data(), n);
    CHECK(bitwise_equal(d1, d2));  // add only, no FMA involved
  }
}

TEST_CASE_TEMPLATE("reductions agree within tolerance across backends", T,
                   float, double) {
  if (!enspost::kernels::backend_supported(Backend::avx2)) return;
  const auto& ks = enspost::kernels::table<T>(Backend::scalar);
  const auto& kv = enspost::kernels::table<T>(Backend::avx2);
  const double rel = sizeof(T) == 4 ? 1e-5 : 1e-12;

  unsigned seed = 900;
  for (std::size_t n : kSizes) {
    auto a = random_vec<T>(n, seed++);
    auto b = random_vec<T>(n, seed++);
    check_close(ks.dot(a.data(), b.data(), n), kv.dot(a.data(), b.data(), n),
                rel);
    check_close(ks.sum(a.data(), n), kv.sum(a.data(), n), rel);
  }
}

TEST_CASE("adam first step with unit gradient moves the parameter by -lr") {
  const auto& k = enspost::kernels::table<double>(Backend::scalar);
  double p = 0.0, g = 1.0, m = 0.0, v = 0.0;
  const double b1 = 0.9, b2 = 0.999, eps = 1e-8, lr = 1e-3;
  const double c1 = 1.0 / (1.0 - b1), c2 = 1.0 / (1.0 - b2);
  k.adam_step(&p, &g, &m, &v, 1, lr, b1, b2, eps, c1, c2);
  CHECK(std::abs(p - (-lr)) < 1e-9);
  CHECK(m == doctest::Approx(0.1));
  CHECK(v == doctest::Approx(0.001));
}

TEST_CASE("adam with zero gradient leaves parameters unchanged") {
  const auto& k = enspost::kernels::table<double>(Backend::scalar);
  std::vector<double> p = {1.0, -2.0, 0.5};
  std::vector<double> g(3, 0.0), m(3, 0.0), v(3, 0.0);
  for (int t = 1; t <= 10; ++t) {
    const double c1 = 1.0 / (1.0 - std::pow(0.9, t));
    const double c2 = 1.0 / (1.0 - std::pow(0.999, t));
    k.adam_step(p.data(), g.data(), m.data(), v.data(), 3, 1e-3, 0.9, 0.999,
                1e-8, c1, c2);
  }
  CHECK(p[0] == 1.0);
  CHECK(p[1] == -2.0);
  CHECK(p[2] == 0.5);
}

TEST_CASE_TEMPLATE("adam agrees across backends", T, float, double) {
  if (!enspost::kernels::backend_supported(Backend::avx2)) return;
  const auto& ks = enspost::kernels::table<T>(Backend::scalar);
  const auto& kv = enspost::kernels::table<T>(Backend::avx2);
  const double rel = sizeof(T) == 4 ? 1e-5 : 1e-12;

  for (std::size_t n : kSizes) {
    auto p1 = random_vec<T>(n, 41);
    auto g = random_vec<T>(n, 42);
    auto m1 = random_vec<T>(n, 43, T(-0.1), T(0.1));
    auto v1 = random_vec<T>(n, 44, T(0.001), T(0.1));
    auto p2 = p1;
    auto m2 = m1;
    auto v2 = v1;
    const T c1 = T(1) / (T(1) - T(0.9)), c2 = T(1) / (T(1) - T(0.999));
    ks.adam_step(p1.data(), g.data(), m1.data(), v1.data(), n, T(1e-3), T(0.9),
                 T(0.999), T(1e-8), c1, c2);
    kv.adam_step(p2.data(), g.data(), m2.data(), v2.data(), n, T(1e-3), T(0.9),
                 T(0.999), T(1e-8), c1, c2);
    for (std::size_t i = 0; i < n; ++i) {
      check_close(p1[i], p2[i], rel);
      check_close(m1[i], m2[i], rel);
      check_close(v1[i], v2[i], rel);
    }
  }
}

TEST_CASE("reference kernel values") {
  const auto& k = enspost::kernels::table<double>(Backend::scalar);
  const double a[3] = {1, 2, 3}, b[3] = {4, 5, 6};
  CHECK(k.dot(a, b, 3) == 32.0);
  CHECK(k.sum(a, 3) == 6.0);
  double y[3] = {1, 1, 1};
  k.axpy(2.0, a, y, 3);
  CHECK(y[0] == 3.0);
  CHECK(y[1] == 5.0);
  CHECK(y[2] == 7.0);
  double o[3];
  const double neg[3] = {-1, 0, 2};
  k.relu(neg, o, 3);
  CHECK(o[0] == 0.0);
  CHECK(o[1] == 0.0);
  CHECK(o[2] == 2.0);
}
