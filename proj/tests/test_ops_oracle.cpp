#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>
#include <cstring>
#include <random>
#include <vector>

#include "doctest.h"
#include "enspost/kernels.hpp"
#include "enspost/ops.hpp"

using namespace enspost::nn;

namespace {

template <typename T>
Tensor<T> random_tensor(Shape4 s, unsigned seed, double lo = -1.0,
                        double hi = 1.0) {
  std::mt19937 rng(seed);
  std::uniform_real_distribution<double> dist(lo, hi);
  auto t = Tensor<T>::zeros(s);
  for (auto& v : t.values()) v = static_cast<T>(dist(rng));
  return t;
}

// Direct quadruple-loop cross-correlation with explicit coordinate math;
// deliberately shares no code with the library implementation.
template <typename T>
Tensor<T> conv_oracle(const Tensor<T>& x, const Tensor<T>& w,
                      const Tensor<T>& bias, const Conv2dSpec& spec) {
  const auto xs = x.shape(), ws = w.shape();
  const std::int64_t s = spec.stride, d = spec.dilation;
  const auto& p = spec.pad;
  const std::int64_t Hp = xs.h + p.top + p.bottom;
  const std::int64_t Wp = xs.w + p.left + p.right;
  const std::int64_t Ho = (Hp - (ws.h - 1) * d - 1) / s + 1;
  const std::int64_t Wo = (Wp - (ws.w - 1) * d - 1) / s + 1;
  auto out = Tensor<T>::zeros({xs.n, ws.n, Ho, Wo});
  for (std::int64_t n = 0; n < xs.n; ++n)
    for (std::int64_t co = 0; co < ws.n; ++co)
      for (std::int64_t oh = 0; oh < Ho; ++oh)
        for (std::int64_t ow = 0; ow < Wo; ++ow) {
          double acc = bias.at(0, co, 0, 0);
          for (std::int64_t ci = 0; ci < xs.c; ++ci)
            for (std::int64_t kh = 0; kh < ws.h; ++kh)
              for (std::int64_t kw = 0; kw < ws.w; ++kw) {
                const std::int64_t ih = oh * s + kh * d - p.top;
                std::int64_t iw = ow * s + kw * d - p.left;
                if (ih < 0 || ih >= xs.h) continue;
                if (iw < 0 || iw >= xs.w) {
                  if (p.mode != PadSpec::Mode::wrap_lon) continue;
                  iw = ((iw % xs.w) + xs.w) % xs.w;
                }
                acc += double(w.at(co, ci, kh, kw)) * double(x.at(n, ci, ih, iw));
              }
          out.at(n, co, oh, ow) = static_cast<T>(acc);
        }
  return out;
}

template <typename T>
void check_all_close(const Tensor<T>& a, const Tensor<T>& b, double tol) {
  REQUIRE(a.shape() == b.shape());
  for (std::int64_t i = 0; i < a.size(); ++i)
    CHECK(std::abs(double(a.data()[i]) - double(b.data()[i])) < tol);
}

struct ScalarBackendGuard {
  enspost::kernels::Backend saved = enspost::kernels::active_backend();
  ScalarBackendGuard() {
    enspost::kernels::set_active_backend(enspost::kernels::Backend::scalar);
  }
  ~ScalarBackendGuard() { enspost::kernels::set_active_backend(saved); }
};

}  // namespace

TEST_CASE("same_pad splits odd padding to the high side") {
  auto p = same_pad(3, 3, 1, PadSpec::Mode::zero);
  CHECK(p.top == 1);
  CHECK(p.bottom == 1);
  CHECK(p.left == 1);
  CHECK(p.right == 1);
  p = same_pad(3, 3, 2, PadSpec::Mode::zero);
  CHECK(p.top == 2);
  CHECK(p.bottom == 2);
  p = same_pad(2, 2, 1, PadSpec::Mode::zero);
  CHECK(p.top == 0);
  CHECK(p.bottom == 1);
  CHECK(p.left == 0);
  CHECK(p.right == 1);
}

TEST_CASE("conv2d box sum on ones: center 9, corners 4") {
  auto x = Tensor<double>::full({1, 1, 3, 3}, 1.0);
  auto w = Tensor<double>::full({1, 1, 3, 3}, 1.0);
  auto b = Tensor<double>::zeros({1, 1, 1, 1});
  Conv2dSpec spec;
  spec.pad = same_pad(3, 3, 1, PadSpec::Mode::zero);
  auto y = conv2d<double>(nullptr, x, w, b, spec);
  REQUIRE(y.shape() == Shape4{1, 1, 3, 3});
  CHECK(y.at(0, 0, 1, 1) == 9.0);
  CHECK(y.at(0, 0, 0, 0) == 4.0);
  CHECK(y.at(0, 0, 0, 2) == 4.0);
  CHECK(y.at(0, 0, 2, 0) == 4.0);
  CHECK(y.at(0, 0, 2, 2) == 4.0);
  CHECK(y.at(0, 0, 0, 1) == 6.0);
}

TEST_CASE("conv2d 1x1 identity kernel reproduces the input") {
  auto x = random_tensor<float>({2, 3, 4, 5}, 7);
  auto w = Tensor<float>::zeros({3, 3, 1, 1});
  for (int c = 0; c < 3; ++c) w.at(c, c, 0, 0) = 1.f;
  auto b = Tensor<float>::zeros({1, 3, 1, 1});
  auto y = conv2d<float>(nullptr, x, w, b, Conv2dSpec{});
  // One axpy with weight 1 per channel; bit-identical to the input.
  CHECK(std::memcmp(y.data(), x.data(), sizeof(float) * x.size()) == 0);
}

TEST_CASE_TEMPLATE("conv2d dilation 2 matches the direct-summation oracle", T,
                   float, double) {
  auto x = random_tensor<T>({1, 2, 5, 5}, 11);
  auto w = random_tensor<T>({3, 2, 3, 3}, 12);
  auto b = random_tensor<T>({1, 3, 1, 1}, 13);
  Conv2dSpec spec;
  spec.dilation = 2;
  spec.pad = PadSpec{.top = 2, .bottom = 2, .left = 2, .right = 2,
                     .mode = PadSpec::Mode::zero};
  auto y = conv2d<T>(nullptr, x, w, b, spec);
  REQUIRE(y.shape() == Shape4{1, 3, 5, 5});
  check_all_close(y, conv_oracle(x, w, b, spec), 1e-5);
}

TEST_CASE("conv2d strided matches the oracle") {
  auto x = random_tensor<double>({2, 3, 7, 9}, 21);
  auto w = random_tensor<double>({4, 3, 3, 3}, 22);
  auto b = random_tensor<double>({1, 4, 1, 1}, 23);
  Conv2dSpec spec;
  spec.stride = 2;
  spec.pad = same_pad(3, 3, 1, PadSpec::Mode::zero);
  auto y = conv2d<double>(nullptr, x, w, b, spec);
  REQUIRE(y.shape() == Shape4{2, 4, 4, 5});
  check_all_close(y, conv_oracle(x, w, b, spec), 1e-12);
}

TEST_CASE("conv2d wrap padding wraps longitude, zeros latitude") {
  // 1x3 kernel selecting the left padded cell: with wrap the first output
  // column reads the last input column.
  auto x = Tensor<double>::from_data({1, 1, 2, 2}, {1, 2, 3, 4});
  auto w = Tensor<double>::from_data({1, 1, 1, 3}, {1, 0, 0});
  auto b = Tensor<double>::zeros({1, 1, 1, 1});
  Conv2dSpec spec;
  spec.pad = PadSpec{.top = 0, .bottom = 0, .left = 1, .right = 1,
                     .mode = PadSpec::Mode::wrap_lon};
  auto y = conv2d<double>(nullptr, x, w, b, spec);
  REQUIRE(y.shape() == Shape4{1, 1, 2, 2});
  CHECK(y.at(0, 0, 0, 0) == 2.0);  // wrapped from column 1
  CHECK(y.at(0, 0, 0, 1) == 1.0);
  CHECK(y.at(0, 0, 1, 0) == 4.0);
  CHECK(y.at(0, 0, 1, 1) == 3.0);

  // Vertical kernel: rows beyond the grid stay zero even in wrap mode.
  auto wv = Tensor<double>::from_data({1, 1, 3, 1}, {1, 0, 0});
  Conv2dSpec vspec;
  vspec.pad = PadSpec{.top = 1, .bottom = 1, .left = 0, .right = 0,
                      .mode = PadSpec::Mode::wrap_lon};
  auto yv = conv2d<double>(nullptr, x, wv, b, vspec);
  CHECK(yv.at(0, 0, 0, 0) == 0.0);
  CHECK(yv.at(0, 0, 1, 0) == 1.0);

  auto xr = random_tensor<double>({1, 2, 4, 6}, 31);
  auto wr = random_tensor<double>({2, 2, 3, 3}, 32);
  auto br = random_tensor<double>({1, 2, 1, 1}, 33);
  Conv2dSpec rspec;
  rspec.pad = same_pad(3, 3, 1, PadSpec::Mode::wrap_lon);
  check_all_close(conv2d<double>(nullptr, xr, wr, br, rspec),
                  conv_oracle(xr, wr, br, rspec), 1e-12);
}

TEST_CASE("conv2d is linear in the input") {
  auto x = random_tensor<double>({1, 2, 6, 6}, 41);
  auto y = random_tensor<double>({1, 2, 6, 6}, 42);
  auto w = random_tensor<double>({3, 2, 3, 3}, 43);
  auto b = Tensor<double>::zeros({1, 3, 1, 1});
  Conv2dSpec spec;
  spec.pad = same_pad(3, 3, 1, PadSpec::Mode::zero);
  const double a = 1.7, c = -0.6;
  auto mix = Tensor<double>::zeros(x.shape());
  for (std::int64_t i = 0; i < x.size(); ++i)
    mix.data()[i] = a * x.data()[i] + c * y.data()[i];
  auto lhs = conv2d<double>(nullptr, mix, w, b, spec);
  auto cx = conv2d<double>(nullptr, x, w, b, spec);
  auto cy = conv2d<double>(nullptr, y, w, b, spec);
  for (std::int64_t i = 0; i < lhs.size(); ++i)
    CHECK(std::abs(lhs.data()[i] - (a * cx.data()[i] + c * cy.data()[i])) <
          1e-5);
}

TEST_CASE("conv2d rejects bad shapes and parameters") {
  auto x = Tensor<float>::zeros({1, 2, 4, 4});
  auto w = Tensor<float>::zeros({3, 2, 3, 3});
  auto b = Tensor<float>::zeros({1, 3, 1, 1});
  auto w_badc = Tensor<float>::zeros({3, 5, 3, 3});
  CHECK_THROWS_AS(conv2d<float>(nullptr, x, w_badc, b, Conv2dSpec{}),
                  std::invalid_argument);
  auto b_bad = Tensor<float>::zeros({1, 2, 1, 1});
  CHECK_THROWS_AS(conv2d<float>(nullptr, x, w, b_bad, Conv2dSpec{}),
                  std::invalid_argument);
  Conv2dSpec s0;
  s0.stride = 0;
  CHECK_THROWS_AS(conv2d<float>(nullptr, x, w, b, s0), std::invalid_argument);
  Conv2dSpec d0;
  d0.dilation = 0;
  CHECK_THROWS_AS(conv2d<float>(nullptr, x, w, b, d0), std::invalid_argument);
}

TEST_CASE("locally_connected matches the per-pixel matrix product oracle") {
  const std::int64_t Cin = 2, Cout = 3, H = 4, W = 4;
  auto x = random_tensor<double>({1, Cin, H, W}, 51);
  auto w = random_tensor<double>({1, Cout * Cin, H, W}, 52);
  auto b = random_tensor<double>({1, Cout, H, W}, 53);
  auto y = locally_connected<double>(nullptr, x, w, b);
  REQUIRE(y.shape() == Shape4{1, Cout, H, W});
  for (std::int64_t co = 0; co < Cout; ++co)
    for (std::int64_t i = 0; i < H; ++i)
      for (std::int64_t j = 0; j < W; ++j) {
        double acc = b.at(0, co, i, j);
        for (std::int64_t ci = 0; ci < Cin; ++ci)
          acc += w.at(0, co * Cin + ci, i, j) * x.at(0, ci, i, j);
        CHECK(std::abs(y.at(0, co, i, j) - acc) < 1e-6);
      }
}

TEST_CASE("locally_connected identity weights reproduce the input") {
  const std::int64_t C = 3, H = 3, W = 5;
  auto x = random_tensor<float>({2, C, H, W}, 61);
  auto w = Tensor<float>::zeros({1, C * C, H, W});
  for (std::int64_t c = 0; c < C; ++c)
    for (std::int64_t i = 0; i < H; ++i)
      for (std::int64_t j = 0; j < W; ++j) w.at(0, c * C + c, i, j) = 1.f;
  auto b = Tensor<float>::zeros({1, C, H, W});
  auto y = locally_connected<float>(nullptr, x, w, b);
  for (std::int64_t i = 0; i < x.size(); ++i) CHECK(y.data()[i] == x.data()[i]);
}

TEST_CASE("locally_connected with shared filters equals 1x1 conv exactly") {
  ScalarBackendGuard pin;
  const std::int64_t Cin = 3, Cout = 2, H = 4, W = 6;
  auto x = random_tensor<float>({2, Cin, H, W}, 71);
  auto wc = random_tensor<float>({Cout, Cin, 1, 1}, 72);
  auto bc = random_tensor<float>({1, Cout, 1, 1}, 73);
  auto wl = Tensor<float>::zeros({1, Cout * Cin, H, W});
  auto bl = Tensor<float>::zeros({1, Cout, H, W});
  for (std::int64_t co = 0; co < Cout; ++co)
    for (std::int64_t ci = 0; ci < Cin; ++ci)
      for (std::int64_t i = 0; i < H; ++i)
        for (std::int64_t j = 0; j < W; ++j) {
          wl.at(0, co * Cin + ci, i, j) = wc.at(co, ci, 0, 0);
          bl.at(0, co, i, j) = bc.at(0, co, 0, 0);
        }
  auto yc = conv2d<float>(nullptr, x, wc, bc, Conv2dSpec{});
  auto yl = locally_connected<float>(nullptr, x, wl, bl);
  CHECK(std::memcmp(yc.data(), yl.data(), sizeof(float) * yc.size()) == 0);
}

TEST_CASE("locally_connected rejects mismatched spatial dims") {
  auto x = Tensor<float>::zeros({1, 2, 4, 4});
  auto w = Tensor<float>::zeros({1, 4, 3, 4});
  auto b = Tensor<float>::zeros({1, 2, 4, 4});
  CHECK_THROWS_AS(locally_connected<float>(nullptr, x, w, b),
                  std::invalid_argument);
}

TEST_CASE("bilinear upsample of [[0,1],[2,3]] matches the hand oracle") {
  auto x = Tensor<double>::from_data({1, 1, 2, 2}, {0, 1, 2, 3});
  auto y = bilinear_upsample_2x<double>(nullptr, x);
  REQUIRE(y.shape() == Shape4{1, 1, 4, 4});
  // Sample coordinates (i+0.5)/2-0.5 clamp to {0, 0.25, 0.75, 1}; the field
  // is f(r,c) = 2r + c, so out[i][j] = 2*t[i] + t[j].
  const double t[4] = {0, 0.25, 0.75, 1};
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 4; ++j)
      CHECK(y.at(0, 0, i, j) == doctest::Approx(2 * t[i] + t[j]).epsilon(1e-12));
}

TEST_CASE("bilinear upsample preserves constants and quadruples the sum") {
  auto c = Tensor<double>::full({2, 3, 3, 5}, 2.75);
  auto yc = bilinear_upsample_2x<double>(nullptr, c);
  for (auto v : yc.values()) CHECK(v == 2.75);

  auto x = random_tensor<double>({1, 2, 4, 6}, 81);
  auto y = bilinear_upsample_2x<double>(nullptr, x);
  double sx = 0, sy = 0;
  for (auto v : x.values()) sx += v;
  for (auto v : y.values()) sy += v;
  CHECK(sy == doctest::Approx(4 * sx).epsilon(1e-12));
}

TEST_CASE("max_pool_2x2 matches a window-scan oracle") {
  auto x = random_tensor<double>({2, 3, 6, 8}, 91);
  auto y = max_pool_2x2<double>(nullptr, x);
  REQUIRE(y.shape() == Shape4{2, 3, 3, 4});
  for (std::int64_t n = 0; n < 2; ++n)
    for (std::int64_t c = 0; c < 3; ++c)
      for (std::int64_t i = 0; i < 3; ++i)
        for (std::int64_t j = 0; j < 4; ++j) {
          const double m = std::max(
              std::max(x.at(n, c, 2 * i, 2 * j), x.at(n, c, 2 * i, 2 * j + 1)),
              std::max(x.at(n, c, 2 * i + 1, 2 * j),
                       x.at(n, c, 2 * i + 1, 2 * j + 1)));
          CHECK(y.at(n, c, i, j) == m);
        }
  CHECK_THROWS_AS(max_pool_2x2<double>(nullptr,
                                       Tensor<double>::zeros({1, 1, 3, 4})),
                  std::invalid_argument);
}

TEST_CASE("max_pool_2x2 routes tied gradients to the first window element") {
  Graph<double> g;
  auto x = Tensor<double>::full({1, 1, 2, 2}, 5.0, true);
  auto y = max_pool_2x2(&g, x);
  auto loss = sum_all(&g, y);
  g.backward(loss);
  CHECK(x.grad()[0] == 1.0);
  CHECK(x.grad()[1] == 0.0);
  CHECK(x.grad()[2] == 0.0);
  CHECK(x.grad()[3] == 0.0);
}

TEST_CASE("batch_norm train mode normalizes each channel") {
  auto x = random_tensor<double>({2, 3, 4, 5}, 101, -3.0, 7.0);
  auto gamma = Tensor<double>::full({1, 3, 1, 1}, 1.0);
  auto beta = Tensor<double>::zeros({1, 3, 1, 1});
  BatchNormState<double> st(3);
  auto y = batch_norm<double>(nullptr, x, gamma, beta, st, true, true);
  const std::int64_t M = 2 * 4 * 5;
  for (std::int64_t c = 0; c < 3; ++c) {
    double s = 0, s2 = 0;
    for (std::int64_t n = 0; n < 2; ++n)
      for (std::int64_t i = 0; i < 4; ++i)
        for (std::int64_t j = 0; j < 5; ++j) {
          s += y.at(n, c, i, j);
          s2 += y.at(n, c, i, j) * y.at(n, c, i, j);
        }
    const double mean = s / M;
    const double var = s2 / M - mean * mean;
    CHECK(std::abs(mean) < 1e-5);
    CHECK(std::abs(var - 1.0) < 1e-4);
  }
}

TEST_CASE("batch_norm affine maps standardized input to mean 3, std 2") {
  // Standardize the input per channel first so gamma/beta act alone.
  auto x = random_tensor<double>({2, 2, 5, 5}, 111, -4.0, 4.0);
  const std::int64_t M = 2 * 5 * 5;
  for (std::int64_t c = 0; c < 2; ++c) {
    double s = 0, s2 = 0;
    for (std::int64_t n = 0; n < 2; ++n)
      for (std::int64_t i = 0; i < 5; ++i)
        for (std::int64_t j = 0; j < 5; ++j) s += x.at(n, c, i, j);
    const double mean = s / M;
    for (std::int64_t n = 0; n < 2; ++n)
      for (std::int64_t i = 0; i < 5; ++i)
        for (std::int64_t j = 0; j < 5; ++j) {
          x.at(n, c, i, j) -= mean;
          s2 += x.at(n, c, i, j) * x.at(n, c, i, j);
        }
    const double sd = std::sqrt(s2 / M);
    for (std::int64_t n = 0; n < 2; ++n)
      for (std::int64_t i = 0; i < 5; ++i)
        for (std::int64_t j = 0; j < 5; ++j) x.at(n, c, i, j) /= sd;
  }
  auto gamma = Tensor<double>::full({1, 2, 1, 1}, 2.0);
  auto beta = Tensor<double>::full({1, 2, 1, 1}, 3.0);
  BatchNormState<double> st(2);
  auto y = batch_norm<double>(nullptr, x, gamma, beta, st, true, false);
  for (std::int64_t c = 0; c < 2; ++c) {
    double s = 0, s2 = 0;
    for (std::int64_t n = 0; n < 2; ++n)
      for (std::int64_t i = 0; i < 5; ++i)
        for (std::int64_t j = 0; j < 5; ++j) {
          s += y.at(n, c, i, j);
          s2 += y.at(n, c, i, j) * y.at(n, c, i, j);
        }
    const double mean = s / M;
    const double sd = std::sqrt(s2 / M - mean * mean);
    CHECK(mean == doctest::Approx(3.0).epsilon(1e-6));
    CHECK(sd == doctest::Approx(2.0).epsilon(1e-4));  // eps shrinks sd a touch
  }
}

TEST_CASE("batch_norm constant channel yields exactly beta") {
  // 1.25 * 24 is exact in binary, so the batch mean equals the value and
  // the centered input is exactly zero.
  auto x = Tensor<double>::full({2, 1, 3, 4}, 1.25);
  auto gamma = Tensor<double>::full({1, 1, 1, 1}, 1.0);
  auto beta = Tensor<double>::full({1, 1, 1, 1}, 0.75);
  BatchNormState<double> st(1);
  auto y = batch_norm<double>(nullptr, x, gamma, beta, st, true, false);
  for (auto v : y.values()) CHECK(v == 0.75);

  auto xf = Tensor<float>::full({2, 1, 3, 4}, 1.25f);
  auto gf = Tensor<float>::full({1, 1, 1, 1}, 1.f);
  auto bf = Tensor<float>::full({1, 1, 1, 1}, 0.75f);
  BatchNormState<float> stf(1);
  auto yf = batch_norm<float>(nullptr, xf, gf, bf, stf, true, false);
  for (auto v : yf.values()) CHECK(v == 0.75f);
}

TEST_CASE("batch_norm running stats follow the EMA and drive eval mode") {
  auto x = random_tensor<double>({2, 2, 3, 3}, 121, 1.0, 5.0);
  auto gamma = Tensor<double>::full({1, 2, 1, 1}, 1.0);
  auto beta = Tensor<double>::zeros({1, 2, 1, 1});
  BatchNormState<double> st(2);
  batch_norm<double>(nullptr, x, gamma, beta, st, true, true);
  const std::int64_t M = 2 * 3 * 3;
  for (std::int64_t c = 0; c < 2; ++c) {
    double s = 0, s2 = 0;
    for (std::int64_t n = 0; n < 2; ++n)
      for (std::int64_t i = 0; i < 3; ++i)
        for (std::int64_t j = 0; j < 3; ++j) {
          s += x.at(n, c, i, j);
          s2 += x.at(n, c, i, j) * x.at(n, c, i, j);
        }
    const double mu = s / M;
    const double var = s2 / M - mu * mu;
    CHECK(st.running_mean[c] == doctest::Approx(0.1 * mu).epsilon(1e-12));
    CHECK(st.running_var[c] ==
          doctest::Approx(0.9 + 0.1 * var).epsilon(1e-12));
  }
  auto y = batch_norm<double>(nullptr, x, gamma, beta, st, false, false);
  for (std::int64_t c = 0; c < 2; ++c) {
    const double inv = 1.0 / std::sqrt(st.running_var[c] + 1e-5);
    CHECK(y.at(0, c, 0, 0) ==
          doctest::Approx((x.at(0, c, 0, 0) - st.running_mean[c]) * inv)
              .epsilon(1e-12));
  }
}

TEST_CASE("batch_norm rejects mismatched channel counts") {
  auto x = Tensor<double>::zeros({1, 3, 2, 2});
  auto gamma = Tensor<double>::full({1, 2, 1, 1}, 1.0);
  auto beta = Tensor<double>::zeros({1, 2, 1, 1});
  BatchNormState<double> st(3);
  CHECK_THROWS_AS(
      batch_norm<double>(nullptr, x, gamma, beta, st, true, false),
      std::invalid_argument);
}

TEST_CASE("concat and narrow are inverse views over channels") {
  auto a = random_tensor<double>({2, 2, 3, 4}, 131);
  auto b = random_tensor<double>({2, 3, 3, 4}, 132);
  auto cat = concat_channels<double>(nullptr, {a, b});
  REQUIRE(cat.shape() == Shape4{2, 5, 3, 4});
  for (std::int64_t n = 0; n < 2; ++n)
    for (std::int64_t i = 0; i < 3; ++i)
      for (std::int64_t j = 0; j < 4; ++j) {
        CHECK(cat.at(n, 0, i, j) == a.at(n, 0, i, j));
        CHECK(cat.at(n, 1, i, j) == a.at(n, 1, i, j));
        CHECK(cat.at(n, 2, i, j) == b.at(n, 0, i, j));
        CHECK(cat.at(n, 4, i, j) == b.at(n, 2, i, j));
      }
  auto back = narrow_channels<double>(nullptr, cat, 2, 3);
  for (std::int64_t i = 0; i < back.size(); ++i)
    CHECK(back.data()[i] == b.data()[i]);
  CHECK_THROWS_AS(narrow_channels<double>(nullptr, cat, 4, 2),
                  std::invalid_argument);
  CHECK_THROWS_AS(
      concat_channels<double>(nullptr,
                              {a, random_tensor<double>({2, 1, 2, 4}, 133)}),
      std::invalid_argument);
}

TEST_CASE("binary ops broadcast like numpy over all four axes") {
  auto a = random_tensor<double>({2, 3, 2, 2}, 141);
  auto b = random_tensor<double>({1, 3, 1, 1}, 142);
  auto y = add<double>(nullptr, a, b);
  REQUIRE(y.shape() == a.shape());
  for (std::int64_t n = 0; n < 2; ++n)
    for (std::int64_t c = 0; c < 3; ++c)
      for (std::int64_t i = 0; i < 2; ++i)
        for (std::int64_t j = 0; j < 2; ++j)
          CHECK(y.at(n, c, i, j) == a.at(n, c, i, j) + b.at(0, c, 0, 0));

  auto s = Tensor<double>::scalar(2.0);
  auto m = mul<double>(nullptr, a, s);
  for (std::int64_t i = 0; i < a.size(); ++i)
    CHECK(m.data()[i] == 2.0 * a.data()[i]);

  auto row = random_tensor<double>({1, 1, 2, 1}, 143);
  auto d = div<double>(nullptr, a, add_scalar<double>(nullptr, mul<double>(nullptr, row, row), 0.5));
  REQUIRE(d.shape() == a.shape());

  CHECK_THROWS_AS(add<double>(nullptr, a, random_tensor<double>({2, 2, 2, 2}, 144)),
                  std::invalid_argument);
}

TEST_CASE("unary op reference values") {
  auto x = Tensor<double>::from_data({1, 1, 1, 5}, {0.0, 1.0, -1.0, 100.0, -100.0});
  auto sg = sigmoid<double>(nullptr, x);
  CHECK(sg.data()[0] == 0.5);
  CHECK(sg.data()[1] == doctest::Approx(1.0 / (1.0 + std::exp(-1.0))));
  CHECK(sg.data()[3] == doctest::Approx(1.0));
  CHECK(sg.data()[4] == doctest::Approx(0.0));
  CHECK(std::isfinite(sg.data()[4]));

  auto sp = softplus<double>(nullptr, x);
  CHECK(sp.data()[0] == doctest::Approx(std::log(2.0)));
  CHECK(sp.data()[3] == doctest::Approx(100.0));
  CHECK(sp.data()[4] == doctest::Approx(0.0));
  for (auto v : sp.values()) CHECK(v >= 0.0);

  auto ex = exp<double>(nullptr, x);
  CHECK(ex.data()[0] == 1.0);
  auto er = erf<double>(nullptr, x);
  CHECK(er.data()[0] == 0.0);
  CHECK(er.data()[1] == doctest::Approx(std::erf(1.0)));
  CHECK(er.data()[3] == doctest::Approx(1.0));
}

TEST_CASE("crps map reference values and input validation") {
  auto mu = Tensor<double>::from_data({1, 1, 1, 2}, {0.0, 0.0});
  auto sigma = Tensor<double>::from_data({1, 1, 1, 2}, {1.0, 1.0});
  auto y = Tensor<double>::from_data({1, 1, 1, 2}, {0.0, 1.0});
  auto c = crps_gaussian_map<double>(nullptr, mu, sigma, y);
  // (sqrt(2)-1)/sqrt(pi) at a perfect hit with unit spread.
  CHECK(c.data()[0] == doctest::Approx(0.23369497).epsilon(1e-6));
  CHECK(c.data()[1] == doctest::Approx(0.60244253).epsilon(1e-6));

  auto bad = Tensor<double>::from_data({1, 1, 1, 2}, {1.0, 0.0});
  CHECK_THROWS_AS(crps_gaussian_map<double>(nullptr, mu, bad, y),
                  std::invalid_argument);
  CHECK_THROWS_AS(
      crps_gaussian_map<double>(nullptr, mu, sigma,
                                Tensor<double>::zeros({1, 1, 1, 3})),
      std::invalid_argument);
}

TEST_CASE("crps map is translation invariant and scale equivariant") {
  auto mu = random_tensor<double>({1, 1, 2, 3}, 151, -1, 1);
  auto sigma = random_tensor<double>({1, 1, 2, 3}, 152, 0.2, 2.0);
  auto y = random_tensor<double>({1, 1, 2, 3}, 153, -1, 1);
  auto base = crps_gaussian_map<double>(nullptr, mu, sigma, y);

  const double shift = 3.75, k = 2.5;
  auto mu2 = add_scalar<double>(nullptr, mu, shift);
  auto y2 = add_scalar<double>(nullptr, y, shift);
  auto shifted = crps_gaussian_map<double>(nullptr, mu2, sigma, y2);
  for (std::int64_t i = 0; i < base.size(); ++i)
    CHECK(shifted.data()[i] == doctest::Approx(base.data()[i]).epsilon(1e-12));

  auto scaled = crps_gaussian_map<double>(
      nullptr, mul_scalar<double>(nullptr, mu, k),
      mul_scalar<double>(nullptr, sigma, k), mul_scalar<double>(nullptr, y, k));
  for (std::int64_t i = 0; i < base.size(); ++i)
    CHECK(scaled.data()[i] ==
          doctest::Approx(k * base.data()[i]).epsilon(1e-12));
}

TEST_CASE("l1 adjacent penalty on the {1,3} pair is 2") {
  auto w = Tensor<double>::from_data({1, 1, 1, 2}, {1.0, 3.0});
  CHECK(l1_adjacent_penalty<double>(nullptr, w).item() == 2.0);
  auto flat = Tensor<double>::full({1, 2, 3, 4}, 0.7);
  CHECK(l1_adjacent_penalty<double>(nullptr, flat).item() == 0.0);
}

TEST_CASE("l1 adjacent penalty matches the pair-enumeration oracle") {
  auto w = random_tensor<double>({1, 2, 4, 4}, 161);
  double expect = 0;
  for (std::int64_t c = 0; c < 2; ++c) {
    for (std::int64_t i = 0; i < 4; ++i)
      for (std::int64_t j = 0; j + 1 < 4; ++j)
        expect += std::abs(w.at(0, c, i, j) - w.at(0, c, i, j + 1));
    for (std::int64_t i = 0; i + 1 < 4; ++i)
      for (std::int64_t j = 0; j < 4; ++j)
        expect += std::abs(w.at(0, c, i, j) - w.at(0, c, i + 1, j));
  }
  CHECK(l1_adjacent_penalty<double>(nullptr, w).item() == expect);
}

TEST_CASE("ssim of a field with itself is exactly 1") {
  auto a = random_tensor<double>({1, 1, 13, 16}, 171);
  SsimSpec spec;
  spec.c1 = 1e-4;
  spec.c2 = 9e-4;
  CHECK(ssim<double>(nullptr, a, a, spec).item() == 1.0);
}

TEST_CASE("ssim is symmetric and bounded") {
  auto a = random_tensor<double>({1, 2, 12, 14}, 181);
  auto b = random_tensor<double>({1, 2, 12, 14}, 182);
  SsimSpec spec;
  spec.c1 = 1e-4;
  spec.c2 = 9e-4;
  const double sab = ssim<double>(nullptr, a, b, spec).item();
  const double sba = ssim<double>(nullptr, b, a, spec).item();
  CHECK(sab == doctest::Approx(sba).epsilon(1e-9));
  CHECK(std::abs(sab) <= 1.0);
  CHECK_THROWS_AS(
      ssim<double>(nullptr, a, random_tensor<double>({1, 2, 12, 13}, 183),
                   spec),
      std::invalid_argument);
}

TEST_CASE("ssim of constant fields 0 and 1 equals c1/(1+c1)") {
  auto a = Tensor<double>::zeros({1, 1, 12, 12});
  auto b = Tensor<double>::full({1, 1, 12, 12}, 1.0);
  SsimSpec spec;
  spec.c1 = 1e-4;
  spec.c2 = 9e-4;
  const double s = ssim<double>(nullptr, a, b, spec).item();
  CHECK(s == doctest::Approx(1e-4 / (1.0 + 1e-4)).epsilon(1e-7));
}
