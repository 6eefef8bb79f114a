#include "enspost/ops.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <memory>
#include <stdexcept>
#include <string>

#include "enspost/kernels.hpp"

namespace enspost::nn {

namespace {

using std::int64_t;

void require(bool ok, const std::string& msg) {
  if (!ok) throw std::invalid_argument(msg);
}

template <typename T>
bool wants_grad(Graph<T>* g, std::initializer_list<const Tensor<T>*> ins) {
  if (!g) return false;
  for (const auto* t : ins)
    if (t->defined() && t->requires_grad()) return true;
  return false;
}

// Maps a padded column index to its source column, or -1 for zero fill.
inline int64_t pad_src_col(int64_t j, int64_t pl, int64_t w, PadSpec::Mode mode) {
  const int64_t c = j - pl;
  if (c >= 0 && c < w) return c;
  if (mode == PadSpec::Mode::wrap_lon) return ((c % w) + w) % w;
  return -1;
}

}  // namespace

PadSpec same_pad(int kh, int kw, int dilation, PadSpec::Mode mode) {
  const int th = (kh - 1) * dilation;
  const int tw = (kw - 1) * dilation;
  PadSpec p;
  p.top = th / 2;
  p.bottom = th - p.top;
  p.left = tw / 2;
  p.right = tw - p.left;
  p.mode = mode;
  return p;
}

// ---------------------------------------------------------------- conv2d

template <typename T>
Tensor<T> conv2d(Graph<T>* g, const Tensor<T>& x, const Tensor<T>& w,
                 const Tensor<T>& bias, const Conv2dSpec& spec) {
  const Shape4 xs = x.shape(), ws = w.shape(), bs = bias.shape();
  require(xs.c == ws.c, "conv2d: input channels " + std::to_string(xs.c) +
                            " != weight Cin " + std::to_string(ws.c));
  require(bs == Shape4{1, ws.n, 1, 1},
          "conv2d: bias shape " + bs.str() + " != (1," + std::to_string(ws.n) +
              ",1,1)");
  require(spec.stride >= 1, "conv2d: stride must be >= 1");
  require(spec.dilation >= 1, "conv2d: dilation must be >= 1");
  const PadSpec& p = spec.pad;
  require(p.top >= 0 && p.bottom >= 0 && p.left >= 0 && p.right >= 0,
          "conv2d: negative padding");

  const int64_t N = xs.n, Cin = xs.c, H = xs.h, W = xs.w;
  const int64_t Cout = ws.n, Kh = ws.h, Kw = ws.w;
  const int64_t s = spec.stride, d = spec.dilation;
  const int64_t Hp = H + p.top + p.bottom, Wp = W + p.left + p.right;
  const int64_t Hout = (Hp - (Kh - 1) * d - 1) / s + 1;
  const int64_t Wout = (Wp - (Kw - 1) * d - 1) / s + 1;
  require(Hp >= (Kh - 1) * d + 1 && Wp >= (Kw - 1) * d + 1,
          "conv2d: kernel extent exceeds padded input " + std::to_string(Hp) +
              "x" + std::to_string(Wp));

  const bool has_pad = p.top || p.bottom || p.left || p.right;
  auto pad_buf = std::make_shared<std::vector<T>>();
  const T* pin = x.data();
  if (has_pad) {
    pad_buf->assign(static_cast<std::size_t>(N * Cin * Hp * Wp), T(0));
    T* pb = pad_buf->data();
    for (int64_t n = 0; n < N; ++n)
      for (int64_t ci = 0; ci < Cin; ++ci) {
        const T* src = x.data() + (n * Cin + ci) * H * W;
        T* dst = pb + (n * Cin + ci) * Hp * Wp;
        for (int64_t i = 0; i < Hp; ++i) {
          const int64_t sr = i - p.top;
          if (sr < 0 || sr >= H) continue;  // zero rows beyond latitude edges
          for (int64_t j = 0; j < Wp; ++j) {
            const int64_t sc = pad_src_col(j, p.left, W, p.mode);
            if (sc >= 0) dst[i * Wp + j] = src[sr * W + sc];
          }
        }
      }
    pin = pad_buf->data();
  }

  auto out = Tensor<T>::zeros({N, Cout, Hout, Wout});
  const auto& kt = kernels::active<T>();
  const T* wd = w.data();
  const T* bd = bias.data();
  for (int64_t n = 0; n < N; ++n)
    for (int64_t co = 0; co < Cout; ++co) {
      T* op = out.data() + (n * Cout + co) * Hout * Wout;
      std::fill(op, op + Hout * Wout, bd[co]);
      for (int64_t ci = 0; ci < Cin; ++ci) {
        const T* plane = pin + (n * Cin + ci) * Hp * Wp;
        const T* wbase = wd + (co * Cin + ci) * Kh * Kw;
        for (int64_t kh = 0; kh < Kh; ++kh)
          for (int64_t kw = 0; kw < Kw; ++kw) {
            const T wv = wbase[kh * Kw + kw];
            for (int64_t oh = 0; oh < Hout; ++oh) {
              const T* row = plane + (oh * s + kh * d) * Wp + kw * d;
              T* orow = op + oh * Wout;
              if (s == 1) {
                kt.axpy(wv, row, orow, static_cast<std::size_t>(Wout));
              } else {
                for (int64_t ow = 0; ow < Wout; ++ow) orow[ow] += wv * row[ow * s];
              }
            }
          }
      }
    }

  if (!wants_grad(g, {&x, &w, &bias})) return out;
  out.set_requires_grad(true);
  Tensor<T> xc = x, wc = w, bc = bias;
  Tensor<T> oc = out;
  const PadSpec pc = p;
  g->record(
      out,
      [xc, wc, bc, oc, pad_buf, pc, N, Cin, Cout, H, W, Hp, Wp, Hout, Wout, Kh,
       Kw, s, d, has_pad]() mutable {
        const auto& kt = kernels::active<T>();
        const T* go = oc.grad().data();
        const T* pin = has_pad ? pad_buf->data() : xc.data();
        if (bc.requires_grad()) {
          T* gb = bc.grad_data();
          for (int64_t n = 0; n < N; ++n)
            for (int64_t co = 0; co < Cout; ++co)
              gb[co] += kt.sum(go + (n * Cout + co) * Hout * Wout,
                               static_cast<std::size_t>(Hout * Wout));
        }
        if (wc.requires_grad()) {
          T* gw = wc.grad_data();
          for (int64_t n = 0; n < N; ++n)
            for (int64_t co = 0; co < Cout; ++co) {
              const T* gop = go + (n * Cout + co) * Hout * Wout;
              for (int64_t ci = 0; ci < Cin; ++ci) {
                const T* plane = pin + (n * Cin + ci) * Hp * Wp;
                T* gwbase = gw + (co * Cin + ci) * Kh * Kw;
                for (int64_t kh = 0; kh < Kh; ++kh)
                  for (int64_t kw = 0; kw < Kw; ++kw) {
                    T acc = T(0);
                    for (int64_t oh = 0; oh < Hout; ++oh) {
                      const T* row = plane + (oh * s + kh * d) * Wp + kw * d;
                      const T* gorow = gop + oh * Wout;
                      if (s == 1) {
                        acc += kt.dot(gorow, row, static_cast<std::size_t>(Wout));
                      } else {
                        for (int64_t ow = 0; ow < Wout; ++ow)
                          acc += gorow[ow] * row[ow * s];
                      }
                    }
                    gwbase[kh * Kw + kw] += acc;
                  }
              }
            }
        }
        if (xc.requires_grad()) {
          T* gx = xc.grad_data();
          std::vector<T> gpad;
          T* gp = gx;
          if (has_pad) {
            gpad.assign(static_cast<std::size_t>(N * Cin * Hp * Wp), T(0));
            gp = gpad.data();
          }
          const T* wd = wc.data();
          for (int64_t n = 0; n < N; ++n)
            for (int64_t co = 0; co < Cout; ++co) {
              const T* gop = go + (n * Cout + co) * Hout * Wout;
              for (int64_t ci = 0; ci < Cin; ++ci) {
                T* gplane = gp + (n * Cin + ci) * Hp * Wp;
                const T* wbase = wd + (co * Cin + ci) * Kh * Kw;
                for (int64_t kh = 0; kh < Kh; ++kh)
                  for (int64_t kw = 0; kw < Kw; ++kw) {
                    const T wv = wbase[kh * Kw + kw];
                    for (int64_t oh = 0; oh < Hout; ++oh) {
                      T* grow = gplane + (oh * s + kh * d) * Wp + kw * d;
                      const T* gorow = gop + oh * Wout;
                      if (s == 1) {
                        kt.axpy(wv, gorow, grow, static_cast<std::size_t>(Wout));
                      } else {
                        for (int64_t ow = 0; ow < Wout; ++ow)
                          grow[ow * s] += wv * gorow[ow];
                      }
                    }
                  }
              }
            }
          if (has_pad) {
            // Fold padded-gradient cells back onto their source cells.
            for (int64_t n = 0; n < N; ++n)
              for (int64_t ci = 0; ci < Cin; ++ci) {
                const T* gplane = gp + (n * Cin + ci) * Hp * Wp;
                T* gxp = gx + (n * Cin + ci) * H * W;
                for (int64_t i = 0; i < Hp; ++i) {
                  const int64_t sr = i - pc.top;
                  if (sr < 0 || sr >= H) continue;
                  for (int64_t j = 0; j < Wp; ++j) {
                    const int64_t sc = pad_src_col(j, pc.left, W, pc.mode);
                    if (sc >= 0) gxp[sr * W + sc] += gplane[i * Wp + j];
                  }
                }
              }
          }
        }
      },
      "conv2d");
  return out;
}

// ------------------------------------------------------ locally_connected

template <typename T>
Tensor<T> locally_connected(Graph<T>* g, const Tensor<T>& x, const Tensor<T>& w,
                            const Tensor<T>& bias) {
  const Shape4 xs = x.shape(), ws = w.shape(), bs = bias.shape();
  require(ws.n == 1 && bs.n == 1,
          "locally_connected: weight/bias batch dim must be 1");
  require(ws.h == xs.h && ws.w == xs.w,
          "locally_connected: weight spatial dims " + ws.str() +
              " do not match input " + xs.str());
  require(ws.c % xs.c == 0, "locally_connected: weight channels " +
                                std::to_string(ws.c) +
                                " not a multiple of input channels " +
                                std::to_string(xs.c));
  const int64_t N = xs.n, Cin = xs.c, H = xs.h, W = xs.w;
  const int64_t Cout = ws.c / Cin;
  require(bs == Shape4{1, Cout, H, W},
          "locally_connected: bias shape " + bs.str() + " != (1," +
              std::to_string(Cout) + "," + std::to_string(H) + "," +
              std::to_string(W) + ")");

  const int64_t P = H * W;
  auto out = Tensor<T>::zeros({N, Cout, H, W});
  const T* xd = x.data();
  const T* wd = w.data();
  const T* bd = bias.data();
  T* od = out.data();
  for (int64_t n = 0; n < N; ++n)
    for (int64_t co = 0; co < Cout; ++co) {
      T* op = od + (n * Cout + co) * P;
      const T* bp = bd + co * P;
      for (int64_t p = 0; p < P; ++p) {
        T acc = bp[p];
        for (int64_t ci = 0; ci < Cin; ++ci)
          acc += wd[(co * Cin + ci) * P + p] * xd[(n * Cin + ci) * P + p];
        op[p] = acc;
      }
    }

  if (!wants_grad(g, {&x, &w, &bias})) return out;
  out.set_requires_grad(true);
  Tensor<T> xc = x, wc = w, bc = bias, oc = out;
  g->record(
      out,
      [xc, wc, bc, oc, N, Cin, Cout, P]() mutable {
        const T* go = oc.grad().data();
        const T* xd = xc.data();
        const T* wd = wc.data();
        if (bc.requires_grad()) {
          T* gb = bc.grad_data();
          for (int64_t n = 0; n < N; ++n)
            for (int64_t co = 0; co < Cout; ++co) {
              const T* gop = go + (n * Cout + co) * P;
              T* gbp = gb + co * P;
              for (int64_t p = 0; p < P; ++p) gbp[p] += gop[p];
            }
        }
        if (wc.requires_grad()) {
          T* gw = wc.grad_data();
          for (int64_t n = 0; n < N; ++n)
            for (int64_t co = 0; co < Cout; ++co) {
              const T* gop = go + (n * Cout + co) * P;
              for (int64_t ci = 0; ci < Cin; ++ci) {
                T* gwp = gw + (co * Cin + ci) * P;
                const T* xp = xd + (n * Cin + ci) * P;
                for (int64_t p = 0; p < P; ++p) gwp[p] += gop[p] * xp[p];
              }
            }
        }
        if (xc.requires_grad()) {
          T* gx = xc.grad_data();
          for (int64_t n = 0; n < N; ++n)
            for (int64_t co = 0; co < Cout; ++co) {
              const T* gop = go + (n * Cout + co) * P;
              for (int64_t ci = 0; ci < Cin; ++ci) {
                T* gxp = gx + (n * Cin + ci) * P;
                const T* wp = wd + (co * Cin + ci) * P;
                for (int64_t p = 0; p < P; ++p) gxp[p] += gop[p] * wp[p];
              }
            }
        }
      },
      "locally_connected");
  return out;
}

// -------------------------------------------------- bilinear_upsample_2x

namespace {

template <typename T>
struct LerpAxis {
  std::vector<int64_t> i0, i1;
  std::vector<T> w1;  // weight of i1; weight of i0 is 1 - w1
};

template <typename T>
LerpAxis<T> make_lerp_axis(int64_t in_size) {
  LerpAxis<T> a;
  const int64_t out_size = 2 * in_size;
  a.i0.resize(out_size);
  a.i1.resize(out_size);
  a.w1.resize(out_size);
  for (int64_t i = 0; i < out_size; ++i) {
    double s = (static_cast<double>(i) + 0.5) / 2.0 - 0.5;
    s = std::min(std::max(s, 0.0), static_cast<double>(in_size - 1));
    const int64_t lo = static_cast<int64_t>(std::floor(s));
    a.i0[i] = lo;
    a.i1[i] = std::min(lo + 1, in_size - 1);
    a.w1[i] = static_cast<T>(s - static_cast<double>(lo));
  }
  return a;
}

}  // namespace

template <typename T>
Tensor<T> bilinear_upsample_2x(Graph<T>* g, const Tensor<T>& x) {
  const Shape4 xs = x.shape();
  const int64_t N = xs.n, C = xs.c, H = xs.h, W = xs.w;
  auto rows = std::make_shared<LerpAxis<T>>(make_lerp_axis<T>(H));
  auto cols = std::make_shared<LerpAxis<T>>(make_lerp_axis<T>(W));
  auto out = Tensor<T>::zeros({N, C, 2 * H, 2 * W});
  const T* xd = x.data();
  T* od = out.data();
  for (int64_t nc = 0; nc < N * C; ++nc) {
    const T* ip = xd + nc * H * W;
    T* op = od + nc * 4 * H * W;
    for (int64_t i = 0; i < 2 * H; ++i) {
      const T wr1 = rows->w1[i], wr0 = T(1) - wr1;
      const T* r0 = ip + rows->i0[i] * W;
      const T* r1 = ip + rows->i1[i] * W;
      T* orow = op + i * 2 * W;
      for (int64_t j = 0; j < 2 * W; ++j) {
        const T wc1 = cols->w1[j], wc0 = T(1) - wc1;
        const int64_t j0 = cols->i0[j], j1 = cols->i1[j];
        orow[j] = wr0 * (wc0 * r0[j0] + wc1 * r0[j1]) +
                  wr1 * (wc0 * r1[j0] + wc1 * r1[j1]);
      }
    }
  }

  if (!wants_grad(g, {&x})) return out;
  out.set_requires_grad(true);
  Tensor<T> xc = x, oc = out;
  g->record(
      out,
      [xc, oc, rows, cols, N, C, H, W]() mutable {
        if (!xc.requires_grad()) return;
        const T* go = oc.grad().data();
        T* gx = xc.grad_data();
        for (int64_t nc = 0; nc < N * C; ++nc) {
          T* gp = gx + nc * H * W;
          const T* gop = go + nc * 4 * H * W;
          for (int64_t i = 0; i < 2 * H; ++i) {
            const T wr1 = rows->w1[i], wr0 = T(1) - wr1;
            T* g0 = gp + rows->i0[i] * W;
            T* g1 = gp + rows->i1[i] * W;
            const T* gorow = gop + i * 2 * W;
            for (int64_t j = 0; j < 2 * W; ++j) {
              const T v = gorow[j];
              const T wc1 = cols->w1[j], wc0 = T(1) - wc1;
              const int64_t j0 = cols->i0[j], j1 = cols->i1[j];
              g0[j0] += wr0 * wc0 * v;
              g0[j1] += wr0 * wc1 * v;
              g1[j0] += wr1 * wc0 * v;
              g1[j1] += wr1 * wc1 * v;
            }
          }
        }
      },
      "bilinear_upsample_2x");
  return out;
}

// ----------------------------------------------------------- max_pool_2x2

template <typename T>
Tensor<T> max_pool_2x2(Graph<T>* g, const Tensor<T>& x) {
  const Shape4 xs = x.shape();
  require(xs.h % 2 == 0, "max_pool_2x2: height " + std::to_string(xs.h) +
                             " is not even");
  require(xs.w % 2 == 0, "max_pool_2x2: width " + std::to_string(xs.w) +
                             " is not even");
  const int64_t N = xs.n, C = xs.c, H = xs.h, W = xs.w;
  const int64_t Ho = H / 2, Wo = W / 2;
  auto out = Tensor<T>::zeros({N, C, Ho, Wo});
  auto arg = std::make_shared<std::vector<int64_t>>(
      static_cast<std::size_t>(out.size()));
  const T* xd = x.data();
  T* od = out.data();
  for (int64_t nc = 0; nc < N * C; ++nc) {
    const T* ip = xd + nc * H * W;
    T* op = od + nc * Ho * Wo;
    int64_t* ap = arg->data() + nc * Ho * Wo;
    for (int64_t i = 0; i < Ho; ++i)
      for (int64_t j = 0; j < Wo; ++j) {
        const int64_t base = (2 * i) * W + 2 * j;
        const int64_t cand[4] = {base, base + 1, base + W, base + W + 1};
        int64_t best = cand[0];
        for (int k = 1; k < 4; ++k)
          if (ip[cand[k]] > ip[best]) best = cand[k];
        op[i * Wo + j] = ip[best];
        ap[i * Wo + j] = nc * H * W + best;
      }
  }

  if (!wants_grad(g, {&x})) return out;
  out.set_requires_grad(true);
  Tensor<T> xc = x, oc = out;
  g->record(
      out,
      [xc, oc, arg]() mutable {
        if (!xc.requires_grad()) return;
        const T* go = oc.grad().data();
        T* gx = xc.grad_data();
        const std::size_t n = static_cast<std::size_t>(oc.size());
        for (std::size_t i = 0; i < n; ++i) gx[(*arg)[i]] += go[i];
      },
      "max_pool_2x2");
  return out;
}

// ------------------------------------------------------------- batch_norm

template <typename T>
Tensor<T> batch_norm(Graph<T>* g, const Tensor<T>& x, const Tensor<T>& gamma,
                     const Tensor<T>& beta, BatchNormState<T>& state,
                     bool training, bool update_running, T eps, T momentum) {
  const Shape4 xs = x.shape();
  const int64_t N = xs.n, C = xs.c, H = xs.h, W = xs.w;
  require(gamma.shape() == Shape4{1, C, 1, 1},
          "batch_norm: gamma shape " + gamma.shape().str() + " != (1," +
              std::to_string(C) + ",1,1)");
  require(beta.shape() == Shape4{1, C, 1, 1},
          "batch_norm: beta shape " + beta.shape().str() + " != (1," +
              std::to_string(C) + ",1,1)");
  require(static_cast<int64_t>(state.running_mean.size()) == C &&
              static_cast<int64_t>(state.running_var.size()) == C,
          "batch_norm: running stats sized " +
              std::to_string(state.running_mean.size()) + " for C=" +
              std::to_string(C));

  const int64_t P = H * W;
  const T M = static_cast<T>(N * P);
  const auto& kt = kernels::active<T>();

  auto mean = std::make_shared<std::vector<T>>(static_cast<std::size_t>(C));
  auto inv_std = std::make_shared<std::vector<T>>(static_cast<std::size_t>(C));
  const T* xd = x.data();
  if (training) {
    for (int64_t c = 0; c < C; ++c) {
      T s = T(0), s2 = T(0);
      for (int64_t n = 0; n < N; ++n) {
        const T* plane = xd + (n * C + c) * P;
        s += kt.sum(plane, static_cast<std::size_t>(P));
        s2 += kt.dot(plane, plane, static_cast<std::size_t>(P));
      }
      const T mu = s / M;
      T var = s2 / M - mu * mu;
      if (var < T(0)) var = T(0);  // guard fp cancellation
      (*mean)[c] = mu;
      (*inv_std)[c] = T(1) / std::sqrt(var + eps);
      if (update_running) {
        state.running_mean[c] =
            (T(1) - momentum) * state.running_mean[c] + momentum * mu;
        state.running_var[c] =
            (T(1) - momentum) * state.running_var[c] + momentum * var;
      }
    }
  } else {
    for (int64_t c = 0; c < C; ++c) {
      (*mean)[c] = state.running_mean[c];
      (*inv_std)[c] = T(1) / std::sqrt(state.running_var[c] + eps);
    }
  }

  auto out = Tensor<T>::zeros(xs);
  const T* gm = gamma.data();
  const T* bt = beta.data();
  T* od = out.data();
  for (int64_t n = 0; n < N; ++n)
    for (int64_t c = 0; c < C; ++c) {
      // Two passes: center first so a constant channel maps to beta exactly.
      T* op = od + (n * C + c) * P;
      kt.affine(T(1), -(*mean)[c], xd + (n * C + c) * P, op,
                static_cast<std::size_t>(P));
      kt.affine(gm[c] * (*inv_std)[c], bt[c], op, op,
                static_cast<std::size_t>(P));
    }

  if (!wants_grad(g, {&x, &gamma, &beta})) return out;
  out.set_requires_grad(true);
  Tensor<T> xc = x, gc = gamma, bc = beta, oc = out;
  g->record(
      out,
      [xc, gc, bc, oc, mean, inv_std, training, N, C, P, M]() mutable {
        const auto& kt = kernels::active<T>();
        const T* go = oc.grad().data();
        const T* xd = xc.data();
        const T* gm = gc.data();
        for (int64_t c = 0; c < C; ++c) {
          const T mu = (*mean)[c];
          const T inv = (*inv_std)[c];
          // s1 = sum(dy), sx = sum(dy * x) over the channel
          T s1 = T(0), sx = T(0);
          for (int64_t n = 0; n < N; ++n) {
            const T* gp = go + (n * C + c) * P;
            const T* xp = xd + (n * C + c) * P;
            s1 += kt.sum(gp, static_cast<std::size_t>(P));
            sx += kt.dot(gp, xp, static_cast<std::size_t>(P));
          }
          const T s2 = inv * (sx - mu * s1);  // sum(dy * xhat)
          if (gc.requires_grad()) gc.grad()[c] += s2;
          if (bc.requires_grad()) bc.grad()[c] += s1;
          if (xc.requires_grad()) {
            T* gx = xc.grad_data();
            if (training) {
              const T A = gm[c] * inv;
              const T B = -A * inv * s2 / M;
              const T D = -A * s1 / M - B * mu;
              for (int64_t n = 0; n < N; ++n) {
                const T* gp = go + (n * C + c) * P;
                const T* xp = xd + (n * C + c) * P;
                T* gxp = gx + (n * C + c) * P;
                for (int64_t p = 0; p < P; ++p)
                  gxp[p] += A * gp[p] + B * xp[p] + D;
              }
            } else {
              const T A = gm[c] * inv;
              for (int64_t n = 0; n < N; ++n)
                kt.axpy(A, go + (n * C + c) * P, gx + (n * C + c) * P,
                        static_cast<std::size_t>(P));
            }
          }
        }
      },
      "batch_norm");
  return out;
}

// --------------------------------------------------------- concat/narrow

template <typename T>
Tensor<T> concat_channels(Graph<T>* g, const std::vector<Tensor<T>>& xs) {
  require(!xs.empty(), "concat_channels: empty input list");
  const Shape4 s0 = xs[0].shape();
  int64_t ctot = 0;
  for (const auto& t : xs) {
    const Shape4 s = t.shape();
    require(s.n == s0.n && s.h == s0.h && s.w == s0.w,
            "concat_channels: mismatched dims " + s.str() + " vs " + s0.str());
    ctot += s.c;
  }
  const int64_t N = s0.n, H = s0.h, W = s0.w, P = H * W;
  auto out = Tensor<T>::zeros({N, ctot, H, W});
  T* od = out.data();
  for (int64_t n = 0; n < N; ++n) {
    int64_t coff = 0;
    for (const auto& t : xs) {
      const int64_t c = t.shape().c;
      std::memcpy(od + (n * ctot + coff) * P, t.data() + n * c * P,
                  static_cast<std::size_t>(c * P) * sizeof(T));
      coff += c;
    }
  }

  bool any = false;
  for (const auto& t : xs) any = any || t.requires_grad();
  if (!g || !any) return out;
  out.set_requires_grad(true);
  std::vector<Tensor<T>> ins = xs;
  Tensor<T> oc = out;
  g->record(
      out,
      [ins, oc, N, ctot, P]() mutable {
        const auto& kt = kernels::active<T>();
        const T* go = oc.grad().data();
        for (int64_t n = 0; n < N; ++n) {
          int64_t coff = 0;
          for (auto& t : ins) {
            const int64_t c = t.shape().c;
            if (t.requires_grad())
              kt.axpy(T(1), go + (n * ctot + coff) * P,
                      t.grad_data() + n * c * P,
                      static_cast<std::size_t>(c * P));
            coff += c;
          }
        }
      },
      "concat_channels");
  return out;
}

template <typename T>
Tensor<T> narrow_channels(Graph<T>* g, const Tensor<T>& x, std::int64_t c0,
                          std::int64_t len) {
  const Shape4 xs = x.shape();
  require(c0 >= 0 && len >= 1 && c0 + len <= xs.c,
          "narrow_channels: range [" + std::to_string(c0) + "," +
              std::to_string(c0 + len) + ") outside C=" + std::to_string(xs.c));
  const int64_t N = xs.n, C = xs.c, P = xs.h * xs.w;
  auto out = Tensor<T>::zeros({N, len, xs.h, xs.w});
  for (int64_t n = 0; n < N; ++n)
    std::memcpy(out.data() + n * len * P, x.data() + (n * C + c0) * P,
                static_cast<std::size_t>(len * P) * sizeof(T));

  if (!wants_grad(g, {&x})) return out;
  out.set_requires_grad(true);
  Tensor<T> xc = x, oc = out;
  g->record(
      out,
      [xc, oc, c0, len, N, C, P]() mutable {
        if (!xc.requires_grad()) return;
        const auto& kt = kernels::active<T>();
        const T* go = oc.grad().data();
        for (int64_t n = 0; n < N; ++n)
          kt.axpy(T(1), go + n * len * P, xc.grad_data() + (n * C + c0) * P,
                  static_cast<std::size_t>(len * P));
      },
      "narrow_channels");
  return out;
}

// ------------------------------------------------- element-wise binaries

namespace {

struct BcastPlan {
  Shape4 out;
  int64_t sa[4], sb[4];  // per-axis strides; 0 on broadcast axes
};

inline BcastPlan make_bcast(const Shape4& a, const Shape4& b, const char* op) {
  auto merge = [&](int64_t x, int64_t y, const char* axis) {
    if (x == y) return x;
    if (x == 1) return y;
    if (y == 1) return x;
    throw std::invalid_argument(std::string(op) + ": axis " + axis +
                                " sizes " + std::to_string(x) + " and " +
                                std::to_string(y) + " are incompatible");
  };
  BcastPlan p;
  p.out = Shape4{merge(a.n, b.n, "n"), merge(a.c, b.c, "c"),
                 merge(a.h, b.h, "h"), merge(a.w, b.w, "w")};
  const int64_t adims[4] = {a.n, a.c, a.h, a.w};
  const int64_t bdims[4] = {b.n, b.c, b.h, b.w};
  int64_t sa = 1, sb = 1;
  for (int i = 3; i >= 0; --i) {
    p.sa[i] = adims[i] == 1 ? 0 : sa;
    p.sb[i] = bdims[i] == 1 ? 0 : sb;
    sa *= adims[i];
    sb *= bdims[i];
  }
  return p;
}

// Calls f(out_index, a_index, b_index) over the broadcast output space.
template <typename F>
void bcast_loop(const BcastPlan& p, F&& f) {
  int64_t io = 0;
  for (int64_t n = 0; n < p.out.n; ++n)
    for (int64_t c = 0; c < p.out.c; ++c)
      for (int64_t h = 0; h < p.out.h; ++h) {
        const int64_t ban = n * p.sa[0] + c * p.sa[1] + h * p.sa[2];
        const int64_t bbn = n * p.sb[0] + c * p.sb[1] + h * p.sb[2];
        for (int64_t w = 0; w < p.out.w; ++w, ++io)
          f(io, ban + w * p.sa[3], bbn + w * p.sb[3]);
      }
}

enum class BinOp { add, sub, mul, div };

template <typename T>
Tensor<T> binary_op(Graph<T>* g, const Tensor<T>& a, const Tensor<T>& b,
                    BinOp op, const char* name) {
  const BcastPlan plan = make_bcast(a.shape(), b.shape(), name);
  auto out = Tensor<T>::zeros(plan.out);
  const bool same = a.shape() == b.shape();
  const T* ad = a.data();
  const T* bd = b.data();
  T* od = out.data();
  const std::size_t n = static_cast<std::size_t>(out.size());
  if (same) {
    const auto& kt = kernels::active<T>();
    switch (op) {
      case BinOp::add: kt.add(ad, bd, od, n); break;
      case BinOp::sub: kt.sub(ad, bd, od, n); break;
      case BinOp::mul: kt.mul(ad, bd, od, n); break;
      case BinOp::div: kt.div(ad, bd, od, n); break;
    }
  } else {
    switch (op) {
      case BinOp::add:
        bcast_loop(plan, [&](int64_t io, int64_t ia, int64_t ib) {
          od[io] = ad[ia] + bd[ib];
        });
        break;
      case BinOp::sub:
        bcast_loop(plan, [&](int64_t io, int64_t ia, int64_t ib) {
          od[io] = ad[ia] - bd[ib];
        });
        break;
      case BinOp::mul:
        bcast_loop(plan, [&](int64_t io, int64_t ia, int64_t ib) {
          od[io] = ad[ia] * bd[ib];
        });
        break;
      case BinOp::div:
        bcast_loop(plan, [&](int64_t io, int64_t ia, int64_t ib) {
          od[io] = ad[ia] / bd[ib];
        });
        break;
    }
  }

  if (!wants_grad(g, {&a, &b})) return out;
  out.set_requires_grad(true);
  Tensor<T> ac = a, bc = b, oc = out;
  g->record(
      out,
      [ac, bc, oc, plan, op]() mutable {
        const T* go = oc.grad().data();
        const T* ad = ac.data();
        const T* bd = bc.data();
        T* ga = ac.requires_grad() ? ac.grad_data() : nullptr;
        T* gb = bc.requires_grad() ? bc.grad_data() : nullptr;
        switch (op) {
          case BinOp::add:
            bcast_loop(plan, [&](int64_t io, int64_t ia, int64_t ib) {
              if (ga) ga[ia] += go[io];
              if (gb) gb[ib] += go[io];
            });
            break;
          case BinOp::sub:
            bcast_loop(plan, [&](int64_t io, int64_t ia, int64_t ib) {
              if (ga) ga[ia] += go[io];
              if (gb) gb[ib] -= go[io];
            });
            break;
          case BinOp::mul:
            bcast_loop(plan, [&](int64_t io, int64_t ia, int64_t ib) {
              if (ga) ga[ia] += go[io] * bd[ib];
              if (gb) gb[ib] += go[io] * ad[ia];
            });
            break;
          case BinOp::div:
            bcast_loop(plan, [&](int64_t io, int64_t ia, int64_t ib) {
              const T inv = T(1) / bd[ib];
              if (ga) ga[ia] += go[io] * inv;
              if (gb) gb[ib] -= go[io] * ad[ia] * inv * inv;
            });
            break;
        }
      },
      name);
  return out;
}

}  // namespace

template <typename T>
Tensor<T> add(Graph<T>* g, const Tensor<T>& a, const Tensor<T>& b) {
  return binary_op(g, a, b, BinOp::add, "add");
}
template <typename T>
Tensor<T> sub(Graph<T>* g, const Tensor<T>& a, const Tensor<T>& b) {
  return binary_op(g, a, b, BinOp::sub, "sub");
}
template <typename T>
Tensor<T> mul(Graph<T>* g, const Tensor<T>& a, const Tensor<T>& b) {
  return binary_op(g, a, b, BinOp::mul, "mul");
}
template <typename T>
Tensor<T> div(Graph<T>* g, const Tensor<T>& a, const Tensor<T>& b) {
  return binary_op(g, a, b, BinOp::div, "div");
}

// ---------------------------------------------------------- scalar ops

template <typename T>
Tensor<T> add_scalar(Graph<T>* g, const Tensor<T>& x, T s) {
  auto out = Tensor<T>::zeros(x.shape());
  kernels::active<T>().affine(T(1), s, x.data(), out.data(),
                              static_cast<std::size_t>(x.size()));
  if (!wants_grad(g, {&x})) return out;
  out.set_requires_grad(true);
  Tensor<T> xc = x, oc = out;
  g->record(
      out,
      [xc, oc]() mutable {
        if (!xc.requires_grad()) return;
        kernels::active<T>().axpy(T(1), oc.grad().data(), xc.grad_data(),
                                  static_cast<std::size_t>(xc.size()));
      },
      "add_scalar");
  return out;
}

template <typename T>
Tensor<T> mul_scalar(Graph<T>* g, const Tensor<T>& x, T s) {
  auto out = Tensor<T>::zeros(x.shape());
  kernels::active<T>().affine(s, T(0), x.data(), out.data(),
                              static_cast<std::size_t>(x.size()));
  if (!wants_grad(g, {&x})) return out;
  out.set_requires_grad(true);
  Tensor<T> xc = x, oc = out;
  g->record(
      out,
      [xc, oc, s]() mutable {
        if (!xc.requires_grad()) return;
        kernels::active<T>().axpy(s, oc.grad().data(), xc.grad_data(),
                                  static_cast<std::size_t>(xc.size()));
      },
      "mul_scalar");
  return out;
}

// ------------------------------------------------------------ unary ops

template <typename T>
Tensor<T> relu(Graph<T>* g, const Tensor<T>& x) {
  auto out = Tensor<T>::zeros(x.shape());
  kernels::active<T>().relu(x.data(), out.data(),
                            static_cast<std::size_t>(x.size()));
  if (!wants_grad(g, {&x})) return out;
  out.set_requires_grad(true);
  Tensor<T> xc = x, oc = out;
  g->record(
      out,
      [xc, oc]() mutable {
        if (!xc.requires_grad()) return;
        kernels::active<T>().relu_mask_add(xc.data(), oc.grad().data(),
                                           xc.grad_data(),
                                           static_cast<std::size_t>(xc.size()));
      },
      "relu");
  return out;
}

namespace {

// Generic element-wise unary op: fwd computes out, dfdx(x, out) the local
// derivative used as dx += dy * dfdx.
template <typename T, typename Fwd, typename Dfdx>
Tensor<T> unary_op(Graph<T>* g, const Tensor<T>& x, const char* name, Fwd fwd,
                   Dfdx dfdx) {
  auto out = Tensor<T>::zeros(x.shape());
  const T* xd = x.data();
  T* od = out.data();
  const std::size_t n = static_cast<std::size_t>(x.size());
  for (std::size_t i = 0; i < n; ++i) od[i] = fwd(xd[i]);
  if (!wants_grad(g, {&x})) return out;
  out.set_requires_grad(true);
  Tensor<T> xc = x, oc = out;
  g->record(
      out,
      [xc, oc, dfdx, n]() mutable {
        if (!xc.requires_grad()) return;
        const T* go = oc.grad().data();
        const T* xd = xc.data();
        const T* od = oc.data();
        T* gx = xc.grad_data();
        for (std::size_t i = 0; i < n; ++i) gx[i] += go[i] * dfdx(xd[i], od[i]);
      },
      name);
  return out;
}

template <typename T>
T stable_sigmoid(T v) {
  if (v >= T(0)) return T(1) / (T(1) + std::exp(-v));
  const T e = std::exp(v);
  return e / (T(1) + e);
}

}  // namespace

template <typename T>
Tensor<T> sigmoid(Graph<T>* g, const Tensor<T>& x) {
  return unary_op(
      g, x, "sigmoid", [](T v) { return stable_sigmoid(v); },
      [](T, T y) { return y * (T(1) - y); });
}

template <typename T>
Tensor<T> softplus(Graph<T>* g, const Tensor<T>& x) {
  return unary_op(
      g, x, "softplus",
      [](T v) {
        return v > T(0) ? v + std::log1p(std::exp(-v)) : std::log1p(std::exp(v));
      },
      [](T v, T) { return stable_sigmoid(v); });
}

template <typename T>
Tensor<T> exp(Graph<T>* g, const Tensor<T>& x) {
  return unary_op(
      g, x, "exp", [](T v) { return std::exp(v); }, [](T, T y) { return y; });
}

template <typename T>
Tensor<T> erf(Graph<T>* g, const Tensor<T>& x) {
  const T two_over_sqrt_pi = T(2) / std::sqrt(static_cast<T>(M_PI));
  return unary_op(
      g, x, "erf", [](T v) { return std::erf(v); },
      [two_over_sqrt_pi](T v, T) { return two_over_sqrt_pi * std::exp(-v * v); });
}

// ------------------------------------------------------------ reductions

template <typename T>
Tensor<T> sum_all(Graph<T>* g, const Tensor<T>& x) {
  auto out = Tensor<T>::scalar(
      kernels::active<T>().sum(x.data(), static_cast<std::size_t>(x.size())));
  if (!wants_grad(g, {&x})) return out;
  out.set_requires_grad(true);
  Tensor<T> xc = x, oc = out;
  g->record(
      out,
      [xc, oc]() mutable {
        if (!xc.requires_grad()) return;
        const T gv = oc.grad()[0];
        T* gx = xc.grad_data();
        const std::size_t n = static_cast<std::size_t>(xc.size());
        for (std::size_t i = 0; i < n; ++i) gx[i] += gv;
      },
      "sum_all");
  return out;
}

template <typename T>
Tensor<T> mean_all(Graph<T>* g, const Tensor<T>& x) {
  const T inv = T(1) / static_cast<T>(x.size());
  auto s = sum_all(g, x);
  return mul_scalar(g, s, inv);
}

// ------------------------------------------------------- crps_gaussian

template <typename T>
Tensor<T> crps_gaussian_map(Graph<T>* g, const Tensor<T>& mu,
                            const Tensor<T>& sigma, const Tensor<T>& y) {
  require(mu.shape() == sigma.shape() && mu.shape() == y.shape(),
          "crps_gaussian_map: shapes differ: mu " + mu.shape().str() +
              ", sigma " + sigma.shape().str() + ", y " + y.shape().str());
  const std::size_t n = static_cast<std::size_t>(mu.size());
  const T* sd = sigma.data();
  for (std::size_t i = 0; i < n; ++i)
    require(sd[i] > T(0), "crps_gaussian_map: sigma must be > 0, got " +
                              std::to_string(static_cast<double>(sd[i])) +
                              " at flat index " + std::to_string(i));

  const T sqrt2 = std::sqrt(T(2));
  const T inv_sqrt_pi = T(1) / std::sqrt(static_cast<T>(M_PI));
  auto out = Tensor<T>::zeros(mu.shape());
  const T* md = mu.data();
  const T* yd = y.data();
  T* od = out.data();
  for (std::size_t i = 0; i < n; ++i) {
    const T dp = yd[i] - md[i];
    const T u = dp / (sqrt2 * sd[i]);
    od[i] = dp * std::erf(u) +
            sd[i] * inv_sqrt_pi * (sqrt2 * std::exp(-u * u) - T(1));
  }

  if (!wants_grad(g, {&mu, &sigma, &y})) return out;
  out.set_requires_grad(true);
  Tensor<T> mc = mu, sc = sigma, yc = y, oc = out;
  g->record(
      out,
      [mc, sc, yc, oc, n, sqrt2, inv_sqrt_pi]() mutable {
        const T* go = oc.grad().data();
        const T* md = mc.data();
        const T* sd = sc.data();
        const T* yd = yc.data();
        T* gm = mc.requires_grad() ? mc.grad_data() : nullptr;
        T* gs = sc.requires_grad() ? sc.grad_data() : nullptr;
        T* gy = yc.requires_grad() ? yc.grad_data() : nullptr;
        for (std::size_t i = 0; i < n; ++i) {
          const T dp = yd[i] - md[i];
          const T u = dp / (sqrt2 * sd[i]);
          const T e = std::erf(u);
          if (gm) gm[i] -= go[i] * e;
          if (gy) gy[i] += go[i] * e;
          if (gs)
            gs[i] += go[i] * inv_sqrt_pi * (sqrt2 * std::exp(-u * u) - T(1));
        }
      },
      "crps_gaussian_map");
  return out;
}

// ------------------------------------------------- l1_adjacent_penalty

template <typename T>
Tensor<T> l1_adjacent_penalty(Graph<T>* g, const Tensor<T>& w) {
  const Shape4 s = w.shape();
  const int64_t NC = s.n * s.c, H = s.h, W = s.w, P = H * W;
  const T* wd = w.data();
  T total = T(0);
  for (int64_t nc = 0; nc < NC; ++nc) {
    const T* p = wd + nc * P;
    for (int64_t i = 0; i < H; ++i)
      for (int64_t j = 0; j + 1 < W; ++j)
        total += std::abs(p[i * W + j] - p[i * W + j + 1]);
    for (int64_t i = 0; i + 1 < H; ++i)
      for (int64_t j = 0; j < W; ++j)
        total += std::abs(p[i * W + j] - p[(i + 1) * W + j]);
  }
  auto out = Tensor<T>::scalar(total);

  if (!wants_grad(g, {&w})) return out;
  out.set_requires_grad(true);
  Tensor<T> wc = w, oc = out;
  g->record(
      out,
      [wc, oc, NC, H, W, P]() mutable {
        if (!wc.requires_grad()) return;
        const T gv = oc.grad()[0];
        const T* wd = wc.data();
        T* gw = wc.grad_data();
        auto sgn = [](T v) { return v > T(0) ? T(1) : (v < T(0) ? T(-1) : T(0)); };
        for (int64_t nc = 0; nc < NC; ++nc) {
          const T* p = wd + nc * P;
          T* gp = gw + nc * P;
          for (int64_t i = 0; i < H; ++i)
            for (int64_t j = 0; j + 1 < W; ++j) {
              const T sg = sgn(p[i * W + j] - p[i * W + j + 1]);
              gp[i * W + j] += gv * sg;
              gp[i * W + j + 1] -= gv * sg;
            }
          for (int64_t i = 0; i + 1 < H; ++i)
            for (int64_t j = 0; j < W; ++j) {
              const T sg = sgn(p[i * W + j] - p[(i + 1) * W + j]);
              gp[i * W + j] += gv * sg;
              gp[(i + 1) * W + j] -= gv * sg;
            }
        }
      },
      "l1_adjacent_penalty");
  return out;
}

// ------------------------------------------------------------------ ssim

template <typename T>
Tensor<T> ssim(Graph<T>* g, const Tensor<T>& a, const Tensor<T>& b,
               const SsimSpec& spec) {
  require(a.shape() == b.shape(), "ssim: shapes differ: " + a.shape().str() +
                                      " vs " + b.shape().str());
  require(spec.window >= 1 && spec.window % 2 == 1,
          "ssim: window must be odd and >= 1");
  require(a.shape().h >= spec.window && a.shape().w >= spec.window,
          "ssim: spatial dims " + a.shape().str() + " smaller than window " +
              std::to_string(spec.window));

  const int win = spec.window;
  std::vector<double> win1d(static_cast<std::size_t>(win));
  const double half = (win - 1) / 2.0;
  double wsum = 0.0;
  for (int i = 0; i < win; ++i) {
    const double dx = i - half;
    win1d[static_cast<std::size_t>(i)] =
        std::exp(-dx * dx / (2.0 * spec.sigma * spec.sigma));
    wsum += win1d[static_cast<std::size_t>(i)];
  }
  std::vector<T> wdata(static_cast<std::size_t>(win * win));
  for (int i = 0; i < win; ++i)
    for (int j = 0; j < win; ++j)
      wdata[static_cast<std::size_t>(i * win + j)] = static_cast<T>(
          win1d[static_cast<std::size_t>(i)] * win1d[static_cast<std::size_t>(j)] /
          (wsum * wsum));
  const auto window =
      Tensor<T>::from_data({1, 1, win, win}, std::move(wdata));
  const auto zero_bias = Tensor<T>::zeros({1, 1, 1, 1});
  const Conv2dSpec valid{};  // stride 1, no padding

  const T c1 = static_cast<T>(spec.c1);
  const T c2 = static_cast<T>(spec.c2);
  const int64_t C = a.shape().c;

  Tensor<T> acc;
  for (int64_t ch = 0; ch < C; ++ch) {
    Tensor<T> ac = C == 1 ? a : narrow_channels(g, a, ch, 1);
    Tensor<T> bc = C == 1 ? b : narrow_channels(g, b, ch, 1);
    auto mu_a = conv2d(g, ac, window, zero_bias, valid);
    auto mu_b = conv2d(g, bc, window, zero_bias, valid);
    auto e_aa = conv2d(g, mul(g, ac, ac), window, zero_bias, valid);
    auto e_bb = conv2d(g, mul(g, bc, bc), window, zero_bias, valid);
    auto e_ab = conv2d(g, mul(g, ac, bc), window, zero_bias, valid);
    auto var_a = sub(g, e_aa, mul(g, mu_a, mu_a));
    auto var_b = sub(g, e_bb, mul(g, mu_b, mu_b));
    auto cov = sub(g, e_ab, mul(g, mu_a, mu_b));
    auto num = mul(g, add_scalar(g, mul_scalar(g, mul(g, mu_a, mu_b), T(2)), c1),
                   add_scalar(g, mul_scalar(g, cov, T(2)), c2));
    auto den =
        mul(g, add_scalar(g, add(g, mul(g, mu_a, mu_a), mul(g, mu_b, mu_b)), c1),
            add_scalar(g, add(g, var_a, var_b), c2));
    auto m = mean_all(g, div(g, num, den));
    acc = acc.defined() ? add(g, acc, m) : m;
  }
  return C == 1 ? acc : mul_scalar(g, acc, T(1) / static_cast<T>(C));
}

// --------------------------------------------------------- instantiation

#define ENSPOST_INSTANTIATE_OPS(T)                                             \
  template Tensor<T> conv2d<T>(Graph<T>*, const Tensor<T>&, const Tensor<T>&,  \
                               const Tensor<T>&, const Conv2dSpec&);           \
  template Tensor<T> locally_connected<T>(Graph<T>*, const Tensor<T>&,         \
                                          const Tensor<T>&, const Tensor<T>&); \
  template Tensor<T> bilinear_upsample_2x<T>(Graph<T>*, const Tensor<T>&);     \
  template Tensor<T> max_pool_2x2<T>(Graph<T>*, const Tensor<T>&);             \
  template Tensor<T> batch_norm<T>(Graph<T>*, const Tensor<T>&,                \
                                   const Tensor<T>&, const Tensor<T>&,         \
                                   BatchNormState<T>&, bool, bool, T, T);      \
  template Tensor<T> concat_channels<T>(Graph<T>*,                             \
                                        const std::vector<Tensor<T>>&);        \
  template Tensor<T> narrow_channels<T>(Graph<T>*, const Tensor<T>&,           \
                                        std::int64_t, std::int64_t);           \
  template Tensor<T> add<T>(Graph<T>*, const Tensor<T>&, const Tensor<T>&);    \
  template Tensor<T> sub<T>(Graph<T>*, const Tensor<T>&, const Tensor<T>&);    \
  template Tensor<T> mul<T>(Graph<T>*, const Tensor<T>&, const Tensor<T>&);    \
  template Tensor<T> div<T>(Graph<T>*, const Tensor<T>&, const Tensor<T>&);    \
  template Tensor<T> add_scalar<T>(Graph<T>*, const Tensor<T>&, T);            \
  template Tensor<T> mul_scalar<T>(Graph<T>*, const Tensor<T>&, T);            \
  template Tensor<T> relu<T>(Graph<T>*, const Tensor<T>&);                     \
  template Tensor<T> sigmoid<T>(Graph<T>*, const Tensor<T>&);                  \
  template Tensor<T> softplus<T>(Graph<T>*, const Tensor<T>&);                 \
  template Tensor<T> exp<T>(Graph<T>*, const Tensor<T>&);                      \
  template Tensor<T> erf<T>(Graph<T>*, const Tensor<T>&);                      \
  template Tensor<T> sum_all<T>(Graph<T>*, const Tensor<T>&);                  \
  template Tensor<T> mean_all<T>(Graph<T>*, const Tensor<T>&);                 \
  template Tensor<T> crps_gaussian_map<T>(Graph<T>*, const Tensor<T>&,         \
                                          const Tensor<T>&, const Tensor<T>&); \
  template Tensor<T> l1_adjacent_penalty<T>(Graph<T>*, const Tensor<T>&);      \
  template Tensor<T> ssim<T>(Graph<T>*, const Tensor<T>&, const Tensor<T>&,    \
                             const SsimSpec&);

ENSPOST_INSTANTIATE_OPS(float)
ENSPOST_INSTANTIATE_OPS(double)

}  // namespace enspost::nn
