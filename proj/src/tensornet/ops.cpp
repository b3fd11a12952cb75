/* Copyright 2026 The Genesis Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "genesis/tensor.hpp"

namespace genesis::nn {

namespace {

struct D5 {
  std::size_t n, c, d, h, w;
  std::size_t spatial() const { return d * h * w; }
};

template <typename Real>
D5 dims5(const Tensor<Real>& t, const char* op, const char* what) {
  if (t.rank() != 5) {
    throw ShapeError(std::string(op) + ": " + what + " must be rank 5 (N,C,D,H,W), got " + shape_str(t.shape));
  }
  return {t.shape[0], t.shape[1], t.shape[2], t.shape[3], t.shape[4]};
}

void require(bool ok, const std::string& msg) {
  if (!ok) throw ShapeError(msg);
}

// Geometry of a direct convolution "in -> out" with weight [O, C, k...].
struct ConvDims {
  std::size_t N, C, O;
  Triple in, k, out, s, p;
};

template <typename Real>
using RowMat = Eigen::Matrix<Real, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename Real>
using MatMap = Eigen::Map<RowMat<Real>>;
template <typename Real>
using ConstMatMap = Eigen::Map<const RowMat<Real>>;
template <typename Real>
using StridedMap = Eigen::Map<RowMat<Real>, 0, Eigen::OuterStride<>>;
template <typename Real>
using ConstStridedMap = Eigen::Map<const RowMat<Real>, 0, Eigen::OuterStride<>>;

// Convolutions run as GEMMs over an unfolded input ("im2col"): one row per
// (in-channel, kernel tap), one column per output voxel. Output depth is
// processed in slabs so the unfolded buffer stays bounded.
constexpr std::size_t kColsBudget = std::size_t{1} << 22;

struct Slabs {
  std::size_t K, ohw, plane_in, plane_out, depth;
};

Slabs slabs(const ConvDims& g) {
  Slabs s;
  s.K = g.C * g.k[0] * g.k[1] * g.k[2];
  s.ohw = g.out[1] * g.out[2];
  s.plane_in = g.in[0] * g.in[1] * g.in[2];
  s.plane_out = g.out[0] * s.ohw;
  s.depth = std::clamp<std::size_t>(kColsBudget / std::max<std::size_t>(1, s.K * s.ohw), 1, g.out[0]);
  return s;
}

// Visits every (row, column) of the unfolded slab [d0, d1) of one sample,
// calling f(col_ptr_row, input_offset or -1) per output row segment.
template <typename F>
void unfold_rows(const ConvDims& g, std::size_t d0, std::size_t d1, F&& f) {
  const auto sp = [](std::size_t o, std::size_t s, std::size_t k, std::size_t p) {
    return static_cast<std::ptrdiff_t>(o * s + k) - static_cast<std::ptrdiff_t>(p);
  };
  std::size_t row = 0;
  for (std::size_t c = 0; c < g.C; ++c)
    for (std::size_t kd = 0; kd < g.k[0]; ++kd)
      for (std::size_t kh = 0; kh < g.k[1]; ++kh)
        for (std::size_t kw = 0; kw < g.k[2]; ++kw, ++row) {
          std::size_t col = 0;
          for (std::size_t od = d0; od < d1; ++od) {
            const std::ptrdiff_t id = sp(od, g.s[0], kd, g.p[0]);
            const bool dok = id >= 0 && id < static_cast<std::ptrdiff_t>(g.in[0]);
            for (std::size_t oh = 0; oh < g.out[1]; ++oh, col += g.out[2]) {
              const std::ptrdiff_t ih = sp(oh, g.s[1], kh, g.p[1]);
              const bool ok = dok && ih >= 0 && ih < static_cast<std::ptrdiff_t>(g.in[1]);
              const std::ptrdiff_t base =
                  ok ? static_cast<std::ptrdiff_t>(((c * g.in[0] + static_cast<std::size_t>(id)) * g.in[1] +
                                                    static_cast<std::size_t>(ih)) *
                                                   g.in[2])
                     : -1;
              f(row, col, base, kw);
            }
          }
        }
}

// Output columns [lo, hi) of a row read input x = ow * stride + kw - pad
// inside [0, W).
std::pair<std::size_t, std::size_t> valid_ow(const ConvDims& g, std::size_t kw) {
  const auto shift = static_cast<std::ptrdiff_t>(kw) - static_cast<std::ptrdiff_t>(g.p[2]);
  const auto sw = static_cast<std::ptrdiff_t>(g.s[2]);
  const auto W = static_cast<std::ptrdiff_t>(g.in[2]);
  std::ptrdiff_t lo = shift < 0 ? (-shift + sw - 1) / sw : 0;
  std::ptrdiff_t hi = W - 1 - shift >= 0 ? (W - 1 - shift) / sw + 1 : 0;
  hi = std::min<std::ptrdiff_t>(hi, static_cast<std::ptrdiff_t>(g.out[2]));
  if (lo > hi) lo = hi;
  return {static_cast<std::size_t>(lo), static_cast<std::size_t>(hi)};
}

template <typename Real>
void im2col(const ConvDims& g, const Real* x, std::size_t d0, std::size_t d1, Real* cols) {
  const std::size_t P = (d1 - d0) * g.out[1] * g.out[2];
  const std::size_t sw = g.s[2];
  unfold_rows(g, d0, d1, [&](std::size_t row, std::size_t col, std::ptrdiff_t base, std::size_t kw) {
    Real* dst = cols + row * P + col;
    const auto [lo, hi] = valid_ow(g, kw);
    if (base < 0 || lo == hi) {
      std::fill(dst, dst + g.out[2], Real(0));
      return;
    }
    const Real* src = x + base + static_cast<std::ptrdiff_t>(kw) - static_cast<std::ptrdiff_t>(g.p[2]);
    std::fill(dst, dst + lo, Real(0));
    if (sw == 1) {
      std::copy(src + lo, src + hi, dst + lo);
    } else {
      for (std::size_t ow = lo; ow < hi; ++ow) dst[ow] = src[ow * sw];
    }
    std::fill(dst + hi, dst + g.out[2], Real(0));
  });
}

template <typename Real>
void col2im_add(const ConvDims& g, const Real* cols, std::size_t d0, std::size_t d1, Real* x) {
  const std::size_t P = (d1 - d0) * g.out[1] * g.out[2];
  const std::size_t sw = g.s[2];
  unfold_rows(g, d0, d1, [&](std::size_t row, std::size_t col, std::ptrdiff_t base, std::size_t kw) {
    if (base < 0) return;
    const auto [lo, hi] = valid_ow(g, kw);
    const Real* src = cols + row * P + col;
    Real* dst = x + base + static_cast<std::ptrdiff_t>(kw) - static_cast<std::ptrdiff_t>(g.p[2]);
    for (std::size_t ow = lo; ow < hi; ++ow) dst[ow * sw] += src[ow];
  });
}

// y += conv(x, w)
template <typename Real>
void conv_forward(const ConvDims& g, const Real* x, const Real* w, Real* y) {
  const Slabs s = slabs(g);
  std::vector<Real> cols(s.K * s.depth * s.ohw);
  const ConstMatMap<Real> wm(w, static_cast<Eigen::Index>(g.O), static_cast<Eigen::Index>(s.K));
  for (std::size_t n = 0; n < g.N; ++n)
    for (std::size_t d0 = 0; d0 < g.out[0]; d0 += s.depth) {
      const std::size_t d1 = std::min(g.out[0], d0 + s.depth);
      const auto P = static_cast<Eigen::Index>((d1 - d0) * s.ohw);
      im2col(g, x + n * g.C * s.plane_in, d0, d1, cols.data());
      StridedMap<Real> ym(y + n * g.O * s.plane_out + d0 * s.ohw, static_cast<Eigen::Index>(g.O), P,
                          Eigen::OuterStride<>(static_cast<Eigen::Index>(s.plane_out)));
      ym.noalias() += wm * ConstMatMap<Real>(cols.data(), static_cast<Eigen::Index>(s.K), P);
    }
}

// gx += conv^T(gy, w)
template <typename Real>
void conv_backward_data(const ConvDims& g, const Real* gy, const Real* w, Real* gx) {
  const Slabs s = slabs(g);
  std::vector<Real> cols(s.K * s.depth * s.ohw);
  const ConstMatMap<Real> wm(w, static_cast<Eigen::Index>(g.O), static_cast<Eigen::Index>(s.K));
  for (std::size_t n = 0; n < g.N; ++n)
    for (std::size_t d0 = 0; d0 < g.out[0]; d0 += s.depth) {
      const std::size_t d1 = std::min(g.out[0], d0 + s.depth);
      const auto P = static_cast<Eigen::Index>((d1 - d0) * s.ohw);
      const ConstStridedMap<Real> gym(gy + n * g.O * s.plane_out + d0 * s.ohw, static_cast<Eigen::Index>(g.O), P,
                                      Eigen::OuterStride<>(static_cast<Eigen::Index>(s.plane_out)));
      MatMap<Real>(cols.data(), static_cast<Eigen::Index>(s.K), P).noalias() = wm.transpose() * gym;
      col2im_add(g, cols.data(), d0, d1, gx + n * g.C * s.plane_in);
    }
}

// gw += sum over positions of gy * x
template <typename Real>
void conv_backward_weight(const ConvDims& g, const Real* gy, const Real* x, Real* gw) {
  const Slabs s = slabs(g);
  std::vector<Real> cols(s.K * s.depth * s.ohw);
  MatMap<Real> gwm(gw, static_cast<Eigen::Index>(g.O), static_cast<Eigen::Index>(s.K));
  for (std::size_t n = 0; n < g.N; ++n)
    for (std::size_t d0 = 0; d0 < g.out[0]; d0 += s.depth) {
      const std::size_t d1 = std::min(g.out[0], d0 + s.depth);
      const auto P = static_cast<Eigen::Index>((d1 - d0) * s.ohw);
      im2col(g, x + n * g.C * s.plane_in, d0, d1, cols.data());
      const ConstStridedMap<Real> gym(gy + n * g.O * s.plane_out + d0 * s.ohw, static_cast<Eigen::Index>(g.O), P,
                                      Eigen::OuterStride<>(static_cast<Eigen::Index>(s.plane_out)));
      gwm.noalias() += gym * ConstMatMap<Real>(cols.data(), static_cast<Eigen::Index>(s.K), P).transpose();
    }
}

template <typename Real>
void add_channel_bias(Real* y, const Real* b, std::size_t N, std::size_t C, std::size_t plane) {
  for (std::size_t n = 0; n < N; ++n)
    for (std::size_t c = 0; c < C; ++c) {
      Real* yp = y + (n * C + c) * plane;
      for (std::size_t i = 0; i < plane; ++i) yp[i] += b[c];
    }
}

template <typename Real>
void channel_bias_grad(const Real* gy, Real* gb, std::size_t N, std::size_t C, std::size_t plane) {
  for (std::size_t n = 0; n < N; ++n)
    for (std::size_t c = 0; c < C; ++c) {
      const Real* gp = gy + (n * C + c) * plane;
      Real acc = 0;
      for (std::size_t i = 0; i < plane; ++i) acc += gp[i];
      gb[c] += acc;
    }
}

template <typename Real>
void check_bias(const Tape<Real>& t, Var b, std::size_t channels, const char* op) {
  if (b.id == Var::kNone) return;
  const auto& bt = t.value(b);
  require(bt.rank() == 1 && bt.shape[0] == channels,
          std::string(op) + ": bias shape " + shape_str(bt.shape) + " does not match " + std::to_string(channels) +
              " output channels");
}

std::uint64_t fnv_step(std::uint64_t h, std::uint64_t v) { return (h ^ v) * 0x100000001b3ULL; }

template <typename Real>
bool wants(const Tape<Real>& t, Var v) {
  return v.id != Var::kNone && t.needs_grad(v);
}

}  // namespace

template <typename Real>
Var conv3d(Tape<Real>& t, Var xv, Var wv, Var bv, const ConvGeometry& geo) {
  const auto& x = t.value(xv);
  const auto& w = t.value(wv);
  const D5 xd = dims5(x, "conv3d", "input");
  const D5 wd = dims5(w, "conv3d", "weight");
  require(wd.c == xd.c, "conv3d: weight expects " + std::to_string(wd.c) + " input channels, input has " +
                            std::to_string(xd.c));
  require(wd.d % 2 == 1 && wd.h % 2 == 1 && wd.w % 2 == 1, "conv3d: kernel sizes must be odd, got " +
                                                                 shape_str(w.shape));
  check_bias(t, bv, wd.n, "conv3d");
  ConvDims g{xd.n, xd.c, wd.n, {xd.d, xd.h, xd.w}, {wd.d, wd.h, wd.w}, {}, geo.stride, geo.padding};
  for (int a = 0; a < 3; ++a) {
    require(g.s[a] >= 1, "conv3d: stride must be positive");
    require(g.in[a] + 2 * g.p[a] >= g.k[a], "conv3d: kernel larger than padded input");
    g.out[a] = conv_out_extent(g.in[a], g.k[a], g.s[a], g.p[a]);
  }
  Tensor<Real> y({g.N, g.O, g.out[0], g.out[1], g.out[2]});
  const std::size_t plane = g.out[0] * g.out[1] * g.out[2];
  if (bv.id != Var::kNone) add_channel_bias(y.data.data(), t.value(bv).data.data(), g.N, g.O, plane);
  conv_forward(g, x.data.data(), w.data.data(), y.data.data());

  return t.record(std::move(y), {xv, wv, bv}, [g, xv, wv, bv, plane](Tape<Real>& tp, std::size_t self) {
    const Real* gy = tp.grad(self).data.data();
    if (wants(tp, xv)) conv_backward_data(g, gy, tp.value(wv).data.data(), tp.grad(xv).data.data());
    if (wants(tp, wv)) conv_backward_weight(g, gy, tp.value(xv).data.data(), tp.grad(wv).data.data());
    if (wants(tp, bv)) channel_bias_grad(gy, tp.grad(bv).data.data(), g.N, g.O, plane);
  });
}

template <typename Real>
Var conv_transpose3d(Tape<Real>& t, Var xv, Var wv, Var bv, const ConvGeometry& geo) {
  const auto& x = t.value(xv);
  const auto& w = t.value(wv);
  const D5 xd = dims5(x, "conv_transpose3d", "input");
  const D5 wd = dims5(w, "conv_transpose3d", "weight");
  require(wd.n == xd.c, "conv_transpose3d: weight expects " + std::to_string(wd.n) + " input channels, input has " +
                            std::to_string(xd.c));
  check_bias(t, bv, wd.c, "conv_transpose3d");
  // Adjoint of a convolution from the (larger) output back to the input.
  ConvDims g{xd.n, wd.c, xd.c, {}, {wd.d, wd.h, wd.w}, {xd.d, xd.h, xd.w}, geo.stride, geo.padding};
  for (int a = 0; a < 3; ++a) {
    require(g.s[a] >= 1, "conv_transpose3d: stride must be positive");
    const std::size_t full = (g.out[a] - 1) * g.s[a] + g.k[a];
    require(full > 2 * g.p[a], "conv_transpose3d: padding too large");
    g.in[a] = full - 2 * g.p[a];
  }
  Tensor<Real> y({g.N, g.C, g.in[0], g.in[1], g.in[2]});
  const std::size_t plane = g.in[0] * g.in[1] * g.in[2];
  if (bv.id != Var::kNone) add_channel_bias(y.data.data(), t.value(bv).data.data(), g.N, g.C, plane);
  conv_backward_data(g, x.data.data(), w.data.data(), y.data.data());

  return t.record(std::move(y), {xv, wv, bv}, [g, xv, wv, bv, plane](Tape<Real>& tp, std::size_t self) {
    const Real* gy = tp.grad(self).data.data();
    if (wants(tp, xv)) conv_forward(g, gy, tp.value(wv).data.data(), tp.grad(xv).data.data());
    if (wants(tp, wv)) conv_backward_weight(g, tp.value(xv).data.data(), gy, tp.grad(wv).data.data());
    if (wants(tp, bv)) channel_bias_grad(gy, tp.grad(bv).data.data(), g.N, g.C, plane);
  });
}

template <typename Real>
Var batchnorm(Tape<Real>& t, Var xv, Var gv, Var bv, const BatchNormState<Real>& st, Mode mode) {
  const auto& x = t.value(xv);
  const D5 xd = dims5(x, "batchnorm", "input");
  const auto& gamma = t.value(gv);
  const auto& beta = t.value(bv);
  require(gamma.size() == xd.c && beta.size() == xd.c,
          "batchnorm: gamma/beta must have one entry per channel (" + std::to_string(xd.c) + ")");
  require(st.running_mean != nullptr && st.running_var != nullptr && st.running_mean->size() == xd.c &&
              st.running_var->size() == xd.c,
          "batchnorm: running statistics missing or of wrong size");
  if (mode == Mode::Train && xd.n < 2) {
    throw ShapeError("batchnorm: TRAIN mode needs a batch of at least 2, got " + std::to_string(xd.n));
  }
  const std::size_t plane = xd.spatial();
  const std::size_t M = xd.n * plane;
  std::vector<Real> mean(xd.c), invstd(xd.c);
  if (mode == Mode::Train) {
    for (std::size_t c = 0; c < xd.c; ++c) {
      double s = 0.0;
      for (std::size_t n = 0; n < xd.n; ++n) {
        const Real* p = x.data.data() + (n * xd.c + c) * plane;
        for (std::size_t i = 0; i < plane; ++i) s += p[i];
      }
      const double mu = s / static_cast<double>(M);
      double ss = 0.0;
      for (std::size_t n = 0; n < xd.n; ++n) {
        const Real* p = x.data.data() + (n * xd.c + c) * plane;
        for (std::size_t i = 0; i < plane; ++i) {
          const double dlt = p[i] - mu;
          ss += dlt * dlt;
        }
      }
      const double var = ss / static_cast<double>(M);
      mean[c] = static_cast<Real>(mu);
      invstd[c] = static_cast<Real>(1.0 / std::sqrt(var + static_cast<double>(st.eps)));
      const double unbiased = M > 1 ? ss / static_cast<double>(M - 1) : var;
      Real& rm = st.running_mean->data[c];
      Real& rv = st.running_var->data[c];
      rm = static_cast<Real>((1.0 - st.momentum) * rm + st.momentum * mu);
      rv = static_cast<Real>((1.0 - st.momentum) * rv + st.momentum * unbiased);
    }
  } else {
    for (std::size_t c = 0; c < xd.c; ++c) {
      mean[c] = st.running_mean->data[c];
      invstd[c] = Real(1) / std::sqrt(st.running_var->data[c] + st.eps);
    }
  }

  Tensor<Real> xhat(x.shape);
  Tensor<Real> y(x.shape);
  for (std::size_t n = 0; n < xd.n; ++n)
    for (std::size_t c = 0; c < xd.c; ++c) {
      const std::size_t off = (n * xd.c + c) * plane;
      for (std::size_t i = 0; i < plane; ++i) {
        const Real h = (x.data[off + i] - mean[c]) * invstd[c];
        xhat.data[off + i] = h;
        y.data[off + i] = gamma.data[c] * h + beta.data[c];
      }
    }

  const bool train = mode == Mode::Train;
  return t.record(std::move(y), {xv, gv, bv},
                  [xv, gv, bv, xd, plane, M, train, xhat = std::move(xhat), invstd](Tape<Real>& tp, std::size_t self) {
                    const auto& gy = tp.grad(self);
                    const auto& gam = tp.value(gv);
                    std::vector<Real> sum_dy(xd.c, Real(0)), sum_dy_xhat(xd.c, Real(0));
                    for (std::size_t n = 0; n < xd.n; ++n)
                      for (std::size_t c = 0; c < xd.c; ++c) {
                        const std::size_t off = (n * xd.c + c) * plane;
                        Real a = 0, b = 0;
                        for (std::size_t i = 0; i < plane; ++i) {
                          a += gy.data[off + i];
                          b += gy.data[off + i] * xhat.data[off + i];
                        }
                        sum_dy[c] += a;
                        sum_dy_xhat[c] += b;
                      }
                    if (wants(tp, gv)) {
                      auto& gg = tp.grad(gv);
                      for (std::size_t c = 0; c < xd.c; ++c) gg.data[c] += sum_dy_xhat[c];
                    }
                    if (wants(tp, bv)) {
                      auto& gb = tp.grad(bv);
                      for (std::size_t c = 0; c < xd.c; ++c) gb.data[c] += sum_dy[c];
                    }
                    if (!wants(tp, xv)) return;
                    auto& gx = tp.grad(xv);
                    const Real inv_m = Real(1) / static_cast<Real>(M);
                    for (std::size_t n = 0; n < xd.n; ++n)
                      for (std::size_t c = 0; c < xd.c; ++c) {
                        const std::size_t off = (n * xd.c + c) * plane;
                        const Real g = gam.data[c] * invstd[c];
                        if (train) {
                          for (std::size_t i = 0; i < plane; ++i) {
                            gx.data[off + i] += g * (gy.data[off + i] - inv_m * sum_dy[c] -
                                                     inv_m * xhat.data[off + i] * sum_dy_xhat[c]);
                          }
                        } else {
                          for (std::size_t i = 0; i < plane; ++i) gx.data[off + i] += g * gy.data[off + i];
                        }
                      }
                  });
}

template <typename Real>
Var relu(Tape<Real>& t, Var xv) {
  const auto& x = t.value(xv);
  Tensor<Real> y(x.shape);
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const bool on = x.data[i] > Real(0);
    y.data[i] = on ? x.data[i] : Real(0);
    h = fnv_step(h, on);
  }
  t.note_branch(h);
  return t.record(std::move(y), {xv}, [xv](Tape<Real>& tp, std::size_t self) {
    const auto& gy = tp.grad(self);
    const auto& xin = tp.value(xv);
    auto& gx = tp.grad(xv);
    for (std::size_t i = 0; i < gx.size(); ++i)
      if (xin.data[i] > Real(0)) gx.data[i] += gy.data[i];
  });
}

template <typename Real>
Var sigmoid(Tape<Real>& t, Var xv) {
  const auto& x = t.value(xv);
  Tensor<Real> y(x.shape);
  for (std::size_t i = 0; i < x.size(); ++i) {
    const Real v = x.data[i];
    if (v >= Real(0)) {
      y.data[i] = Real(1) / (Real(1) + std::exp(-v));
    } else {
      const Real e = std::exp(v);
      y.data[i] = e / (Real(1) + e);
    }
  }
  return t.record(std::move(y), {xv}, [xv](Tape<Real>& tp, std::size_t self) {
    const auto& gy = tp.grad(self);
    const auto& yv = tp.value(Var{self});
    auto& gx = tp.grad(xv);
    for (std::size_t i = 0; i < gx.size(); ++i) gx.data[i] += gy.data[i] * yv.data[i] * (Real(1) - yv.data[i]);
  });
}

template <typename Real>
Var maxpool3d(Tape<Real>& t, Var xv, Triple k) {
  const auto& x = t.value(xv);
  const D5 xd = dims5(x, "maxpool3d", "input");
  require(k[0] >= 1 && k[1] >= 1 && k[2] >= 1, "maxpool3d: kernel must be positive");
  require(xd.d >= k[0] && xd.h >= k[1] && xd.w >= k[2], "maxpool3d: kernel larger than input " + shape_str(x.shape));
  const std::size_t od = xd.d / k[0], oh = xd.h / k[1], ow = xd.w / k[2];
  Tensor<Real> y({xd.n, xd.c, od, oh, ow});
  std::vector<std::size_t> arg(y.size());
  std::size_t o = 0;
  for (std::size_t nc = 0; nc < xd.n * xd.c; ++nc) {
    const std::size_t base = nc * xd.spatial();
    for (std::size_t d = 0; d < od; ++d)
      for (std::size_t h = 0; h < oh; ++h)
        for (std::size_t w = 0; w < ow; ++w, ++o) {
          std::size_t best = base + ((d * k[0]) * xd.h + h * k[1]) * xd.w + w * k[2];
          for (std::size_t a = 0; a < k[0]; ++a)
            for (std::size_t b = 0; b < k[1]; ++b)
              for (std::size_t c = 0; c < k[2]; ++c) {
                const std::size_t idx = base + ((d * k[0] + a) * xd.h + h * k[1] + b) * xd.w + w * k[2] + c;
                if (x.data[idx] > x.data[best]) best = idx;
              }
          arg[o] = best;
          y.data[o] = x.data[best];
        }
  }
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (std::size_t a : arg) h = fnv_step(h, a);
  t.note_branch(h);
  return t.record(std::move(y), {xv}, [xv, arg = std::move(arg)](Tape<Real>& tp, std::size_t self) {
    const auto& gy = tp.grad(self);
    auto& gx = tp.grad(xv);
    for (std::size_t i = 0; i < arg.size(); ++i) gx.data[arg[i]] += gy.data[i];
  });
}

template <typename Real>
Var upsample3d(Tape<Real>& t, Var xv, Triple f) {
  const auto& x = t.value(xv);
  const D5 xd = dims5(x, "upsample3d", "input");
  require(f[0] >= 1 && f[1] >= 1 && f[2] >= 1, "upsample3d: factors must be positive");
  const std::size_t od = xd.d * f[0], oh = xd.h * f[1], ow = xd.w * f[2];
  Tensor<Real> y({xd.n, xd.c, od, oh, ow});
  // src[i] is the input element feeding output element i.
  std::vector<std::size_t> src(y.size());
  std::size_t o = 0;
  for (std::size_t nc = 0; nc < xd.n * xd.c; ++nc) {
    const std::size_t base = nc * xd.spatial();
    for (std::size_t d = 0; d < od; ++d)
      for (std::size_t h = 0; h < oh; ++h)
        for (std::size_t w = 0; w < ow; ++w, ++o) {
          src[o] = base + ((d / f[0]) * xd.h + h / f[1]) * xd.w + w / f[2];
          y.data[o] = x.data[src[o]];
        }
  }
  return t.record(std::move(y), {xv}, [xv, src = std::move(src)](Tape<Real>& tp, std::size_t self) {
    const auto& gy = tp.grad(self);
    auto& gx = tp.grad(xv);
    for (std::size_t i = 0; i < src.size(); ++i) gx.data[src[i]] += gy.data[i];
  });
}

template <typename Real>
Var concat_channels(Tape<Real>& t, Var av, Var bv) {
  const auto& a = t.value(av);
  const auto& b = t.value(bv);
  const D5 ad = dims5(a, "concat_channels", "first input");
  const D5 bd = dims5(b, "concat_channels", "second input");
  require(ad.n == bd.n && ad.d == bd.d && ad.h == bd.h && ad.w == bd.w,
          "concat_channels: shapes " + shape_str(a.shape) + " and " + shape_str(b.shape) + " differ outside C");
  const std::size_t plane = ad.spatial();
  const std::size_t ca = ad.c * plane, cb = bd.c * plane;
  Tensor<Real> y({ad.n, ad.c + bd.c, ad.d, ad.h, ad.w});
  for (std::size_t n = 0; n < ad.n; ++n) {
    std::copy_n(a.data.begin() + n * ca, ca, y.data.begin() + n * (ca + cb));
    std::copy_n(b.data.begin() + n * cb, cb, y.data.begin() + n * (ca + cb) + ca);
  }
  return t.record(std::move(y), {av, bv}, [av, bv, ca, cb, N = ad.n](Tape<Real>& tp, std::size_t self) {
    const auto& gy = tp.grad(self);
    if (wants(tp, av)) {
      auto& ga = tp.grad(av);
      for (std::size_t n = 0; n < N; ++n)
        for (std::size_t i = 0; i < ca; ++i) ga.data[n * ca + i] += gy.data[n * (ca + cb) + i];
    }
    if (wants(tp, bv)) {
      auto& gb = tp.grad(bv);
      for (std::size_t n = 0; n < N; ++n)
        for (std::size_t i = 0; i < cb; ++i) gb.data[n * cb + i] += gy.data[n * (ca + cb) + ca + i];
    }
  });
}

template <typename Real>
Var dense(Tape<Real>& t, Var xv, Var wv, Var bv) {
  const auto& x = t.value(xv);
  const auto& w = t.value(wv);
  require(x.rank() == 2, "dense: input must be rank 2 (N,F), got " + shape_str(x.shape));
  require(w.rank() == 2 && w.shape[1] == x.shape[1],
          "dense: weight " + shape_str(w.shape) + " incompatible with input " + shape_str(x.shape));
  const std::size_t N = x.shape[0], F = x.shape[1], O = w.shape[0];
  check_bias(t, bv, O, "dense");
  Tensor<Real> y({N, O});
  for (std::size_t n = 0; n < N; ++n)
    for (std::size_t o = 0; o < O; ++o) {
      Real acc = bv.id != Var::kNone ? t.value(bv).data[o] : Real(0);
      for (std::size_t f = 0; f < F; ++f) acc += w.data[o * F + f] * x.data[n * F + f];
      y.data[n * O + o] = acc;
    }
  return t.record(std::move(y), {xv, wv, bv}, [xv, wv, bv, N, F, O](Tape<Real>& tp, std::size_t self) {
    const auto& gy = tp.grad(self);
    if (wants(tp, xv)) {
      const auto& wt = tp.value(wv);
      auto& gx = tp.grad(xv);
      for (std::size_t n = 0; n < N; ++n)
        for (std::size_t o = 0; o < O; ++o)
          for (std::size_t f = 0; f < F; ++f) gx.data[n * F + f] += gy.data[n * O + o] * wt.data[o * F + f];
    }
    if (wants(tp, wv)) {
      const auto& xt = tp.value(xv);
      auto& gw = tp.grad(wv);
      for (std::size_t n = 0; n < N; ++n)
        for (std::size_t o = 0; o < O; ++o)
          for (std::size_t f = 0; f < F; ++f) gw.data[o * F + f] += gy.data[n * O + o] * xt.data[n * F + f];
    }
    if (wants(tp, bv)) {
      auto& gb = tp.grad(bv);
      for (std::size_t n = 0; n < N; ++n)
        for (std::size_t o = 0; o < O; ++o) gb.data[o] += gy.data[n * O + o];
    }
  });
}

template <typename Real>
Var global_avg_pool(Tape<Real>& t, Var xv) {
  const auto& x = t.value(xv);
  const D5 xd = dims5(x, "global_avg_pool", "input");
  const std::size_t plane = xd.spatial();
  Tensor<Real> y({xd.n, xd.c});
  for (std::size_t nc = 0; nc < xd.n * xd.c; ++nc) {
    Real acc = 0;
    for (std::size_t i = 0; i < plane; ++i) acc += x.data[nc * plane + i];
    y.data[nc] = acc / static_cast<Real>(plane);
  }
  return t.record(std::move(y), {xv}, [xv, plane](Tape<Real>& tp, std::size_t self) {
    const auto& gy = tp.grad(self);
    auto& gx = tp.grad(xv);
    const Real inv = Real(1) / static_cast<Real>(plane);
    for (std::size_t nc = 0; nc < gy.size(); ++nc)
      for (std::size_t i = 0; i < plane; ++i) gx.data[nc * plane + i] += gy.data[nc] * inv;
  });
}

template <typename Real>
Var add(Tape<Real>& t, Var av, Var bv) {
  const auto& a = t.value(av);
  const auto& b = t.value(bv);
  require(a.shape == b.shape, "add: shapes " + shape_str(a.shape) + " and " + shape_str(b.shape) + " differ");
  Tensor<Real> y(a.shape);
  for (std::size_t i = 0; i < a.size(); ++i) y.data[i] = a.data[i] + b.data[i];
  return t.record(std::move(y), {av, bv}, [av, bv](Tape<Real>& tp, std::size_t self) {
    const auto& gy = tp.grad(self);
    for (Var v : {av, bv}) {
      if (!wants(tp, v)) continue;
      auto& g = tp.grad(v);
      for (std::size_t i = 0; i < g.size(); ++i) g.data[i] += gy.data[i];
    }
  });
}

template <typename Real>
Var mul(Tape<Real>& t, Var av, Var bv) {
  const auto& a = t.value(av);
  const auto& b = t.value(bv);
  require(a.shape == b.shape, "mul: shapes " + shape_str(a.shape) + " and " + shape_str(b.shape) + " differ");
  Tensor<Real> y(a.shape);
  for (std::size_t i = 0; i < a.size(); ++i) y.data[i] = a.data[i] * b.data[i];
  return t.record(std::move(y), {av, bv}, [av, bv](Tape<Real>& tp, std::size_t self) {
    const auto& gy = tp.grad(self);
    if (wants(tp, av)) {
      const auto& bt = tp.value(bv);
      auto& ga = tp.grad(av);
      for (std::size_t i = 0; i < ga.size(); ++i) ga.data[i] += gy.data[i] * bt.data[i];
    }
    if (wants(tp, bv)) {
      const auto& at = tp.value(av);
      auto& gb = tp.grad(bv);
      for (std::size_t i = 0; i < gb.size(); ++i) gb.data[i] += gy.data[i] * at.data[i];
    }
  });
}

template <typename Real>
Var scale(Tape<Real>& t, Var xv, Real factor) {
  const auto& x = t.value(xv);
  Tensor<Real> y(x.shape);
  for (std::size_t i = 0; i < x.size(); ++i) y.data[i] = x.data[i] * factor;
  return t.record(std::move(y), {xv}, [xv, factor](Tape<Real>& tp, std::size_t self) {
    const auto& gy = tp.grad(self);
    auto& gx = tp.grad(xv);
    for (std::size_t i = 0; i < gx.size(); ++i) gx.data[i] += gy.data[i] * factor;
  });
}

template <typename Real>
Var sum(Tape<Real>& t, Var xv) {
  const auto& x = t.value(xv);
  Real acc = 0;
  for (Real v : x.data) acc += v;
  return t.record(Tensor<Real>({1}, {acc}), {xv}, [xv](Tape<Real>& tp, std::size_t self) {
    const Real g = tp.grad(self).data[0];
    auto& gx = tp.grad(xv);
    for (Real& v : gx.data) v += g;
  });
}

template <typename Real>
Var mse_loss(Tape<Real>& t, Var pv, Var tv) {
  const auto& p = t.value(pv);
  const auto& y = t.value(tv);
  require(p.shape == y.shape, "mse_loss: prediction " + shape_str(p.shape) + " vs target " + shape_str(y.shape));
  require(!p.empty(), "mse_loss: empty input");
  double acc = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double d = static_cast<double>(p.data[i]) - y.data[i];
    acc += d * d;
  }
  const Real loss = static_cast<Real>(acc / static_cast<double>(p.size()));
  return t.record(Tensor<Real>({1}, {loss}), {pv, tv}, [pv, tv](Tape<Real>& tp, std::size_t self) {
    const auto& pt = tp.value(pv);
    const auto& yt = tp.value(tv);
    const Real k = Real(2) * tp.grad(self).data[0] / static_cast<Real>(pt.size());
    if (wants(tp, pv)) {
      auto& gp = tp.grad(pv);
      for (std::size_t i = 0; i < gp.size(); ++i) gp.data[i] += k * (pt.data[i] - yt.data[i]);
    }
    if (wants(tp, tv)) {
      auto& gt = tp.grad(tv);
      for (std::size_t i = 0; i < gt.size(); ++i) gt.data[i] -= k * (pt.data[i] - yt.data[i]);
    }
  });
}

template <typename Real>
Var bce_loss(Tape<Real>& t, Var pv, Var tv) {
  const auto& p = t.value(pv);
  const auto& y = t.value(tv);
  require(p.shape == y.shape, "bce_loss: prediction " + shape_str(p.shape) + " vs target " + shape_str(y.shape));
  require(!p.empty(), "bce_loss: empty input");
  // Log terms are floored at -100 and the gradient denominator at 1e-12, so
  // saturated predictions still receive a gradient.
  auto safe_log = [](double v) { return std::max(std::log(v), -100.0); };
  double acc = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double q = p.data[i];
    acc -= y.data[i] * safe_log(q) + (1.0 - y.data[i]) * safe_log(1.0 - q);
  }
  const Real loss = static_cast<Real>(acc / static_cast<double>(p.size()));
  return t.record(Tensor<Real>({1}, {loss}), {pv}, [pv, tv](Tape<Real>& tp, std::size_t self) {
    const auto& pt = tp.value(pv);
    const auto& yt = tp.value(tv);
    const double k = static_cast<double>(tp.grad(self).data[0]) / static_cast<double>(pt.size());
    auto& gp = tp.grad(pv);
    for (std::size_t i = 0; i < gp.size(); ++i) {
      const double q = pt.data[i];
      gp.data[i] += static_cast<Real>(k * (q - yt.data[i]) / std::max(q * (1.0 - q), 1e-12));
    }
  });
}

template <typename Real>
Var dice_loss(Tape<Real>& t, Var pv, Var tv, double smooth) {
  const auto& p = t.value(pv);
  const auto& y = t.value(tv);
  require(p.shape == y.shape, "dice_loss: prediction " + shape_str(p.shape) + " vs target " + shape_str(y.shape));
  require(!p.empty(), "dice_loss: empty input");
  require(smooth > 0.0, "dice_loss: smoothing must be positive");
  double inter = 0.0, total = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    inter += static_cast<double>(p.data[i]) * y.data[i];
    total += static_cast<double>(p.data[i]) + y.data[i];
  }
  const double num = 2.0 * inter + smooth, den = total + smooth;
  return t.record(Tensor<Real>({1}, {static_cast<Real>(1.0 - num / den)}), {pv},
                  [pv, tv, num, den](Tape<Real>& tp, std::size_t self) {
                    const auto& yt = tp.value(tv);
                    const double g = tp.grad(self).data[0];
                    auto& gp = tp.grad(pv);
                    // d/dp_i of -(num/den) = -(2 y_i den - num) / den^2
                    for (std::size_t i = 0; i < gp.size(); ++i)
                      gp.data[i] += static_cast<Real>(g * (num - 2.0 * yt.data[i] * den) / (den * den));
                  });
}

#define GENESIS_INSTANTIATE_OPS(R)                                                     \
  template Var conv3d<R>(Tape<R>&, Var, Var, Var, const ConvGeometry&);                \
  template Var conv_transpose3d<R>(Tape<R>&, Var, Var, Var, const ConvGeometry&);      \
  template Var batchnorm<R>(Tape<R>&, Var, Var, Var, const BatchNormState<R>&, Mode); \
  template Var relu<R>(Tape<R>&, Var);                                                 \
  template Var sigmoid<R>(Tape<R>&, Var);                                              \
  template Var maxpool3d<R>(Tape<R>&, Var, Triple);                                    \
  template Var upsample3d<R>(Tape<R>&, Var, Triple);                                   \
  template Var concat_channels<R>(Tape<R>&, Var, Var);                                 \
  template Var dense<R>(Tape<R>&, Var, Var, Var);                                      \
  template Var global_avg_pool<R>(Tape<R>&, Var);                                      \
  template Var add<R>(Tape<R>&, Var, Var);                                             \
  template Var mul<R>(Tape<R>&, Var, Var);                                             \
  template Var scale<R>(Tape<R>&, Var, R);                                             \
  template Var sum<R>(Tape<R>&, Var);                                                  \
  template Var mse_loss<R>(Tape<R>&, Var, Var);                                        \
  template Var bce_loss<R>(Tape<R>&, Var, Var);                                       \
  template Var dice_loss<R>(Tape<R>&, Var, Var, double);

GENESIS_INSTANTIATE_OPS(float)
GENESIS_INSTANTIATE_OPS(double)

}  // namespace genesis::nn
