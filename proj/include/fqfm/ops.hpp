// Copyright 2026 The fqfm Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <Eigen/Dense>
#include <cmath>

#include "fqfm/tensor.hpp"

namespace fqfm {

/// Reflect-without-repeat border index: maps any integer onto [0, n).
/// Period 2n-2, so the edge samples are not duplicated.
inline std::int64_t mirror_index(std::int64_t t, std::int64_t n) {
  if (n == 1) return 0;
  const std::int64_t p = 2 * n - 2;
  std::int64_t m = ((t % p) + p) % p;
  return m < n ? m : p - m;
}

template <class S>
using RowMat = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <class S>
using MapRowMat = Eigen::Map<RowMat<S>>;
template <class S>
using CMapRowMat = Eigen::Map<const RowMat<S>>;

// ---------------------------------------------------------------------------
// Element-wise arithmetic
// ---------------------------------------------------------------------------

template <class S>
Tensor<S> add(const Tensor<S>& a, const Tensor<S>& b) {
  FQFM_REQUIRE(a.shape() == b.shape(), "add: shape mismatch ", shape_str(a.shape()), " vs ",
               shape_str(b.shape()));
  Tensor<S> out(a.shape());
  for (std::int64_t i = 0; i < a.size(); ++i) out[i] = a[i] + b[i];
  instrument::add_flops(a.size());
  return out;
}

template <class S>
Tensor<S> sub(const Tensor<S>& a, const Tensor<S>& b) {
  FQFM_REQUIRE(a.shape() == b.shape(), "sub: shape mismatch ", shape_str(a.shape()), " vs ",
               shape_str(b.shape()));
  Tensor<S> out(a.shape());
  for (std::int64_t i = 0; i < a.size(); ++i) out[i] = a[i] - b[i];
  instrument::add_flops(a.size());
  return out;
}

template <class S>
Tensor<S> mul(const Tensor<S>& a, const Tensor<S>& b) {
  FQFM_REQUIRE(a.shape() == b.shape(), "mul: shape mismatch ", shape_str(a.shape()), " vs ",
               shape_str(b.shape()));
  Tensor<S> out(a.shape());
  for (std::int64_t i = 0; i < a.size(); ++i) out[i] = a[i] * b[i];
  instrument::add_flops(a.size());
  return out;
}

template <class S>
Tensor<S> scale(const Tensor<S>& a, S s) {
  Tensor<S> out(a.shape());
  for (std::int64_t i = 0; i < a.size(); ++i) out[i] = a[i] * s;
  instrument::add_flops(a.size());
  return out;
}

// a + s*b
template <class S>
Tensor<S> add_scaled(const Tensor<S>& a, const Tensor<S>& b, S s) {
  FQFM_REQUIRE(a.shape() == b.shape(), "add_scaled: shape mismatch ", shape_str(a.shape()), " vs ",
               shape_str(b.shape()));
  Tensor<S> out(a.shape());
  for (std::int64_t i = 0; i < a.size(); ++i) out[i] = a[i] + s * b[i];
  instrument::add_flops(2 * a.size());
  return out;
}

// ---------------------------------------------------------------------------
// Channel slicing / concatenation ([B,C,H,W])
// ---------------------------------------------------------------------------

template <class S>
Tensor<S> slice_channels(const Tensor<S>& x, std::int64_t c0, std::int64_t c1) {
  FQFM_REQUIRE(x.rank() == 4, "slice_channels: expected rank-4 input, got ", shape_str(x.shape()));
  FQFM_REQUIRE(0 <= c0 && c0 < c1 && c1 <= x.extent(1), "slice_channels: bad range [", c0, ",", c1,
               ") for ", shape_str(x.shape()));
  const std::int64_t B = x.extent(0), C = x.extent(1), HW = x.extent(2) * x.extent(3);
  Tensor<S> out({B, c1 - c0, x.extent(2), x.extent(3)});
  for (std::int64_t b = 0; b < B; ++b)
    for (std::int64_t c = c0; c < c1; ++c)
      std::copy_n(x.data() + (b * C + c) * HW, HW, out.data() + (b * (c1 - c0) + (c - c0)) * HW);
  return out;
}

template <class S>
Tensor<S> concat_channels(const Tensor<S>& a, const Tensor<S>& b) {
  FQFM_REQUIRE(a.rank() == 4 && b.rank() == 4 && a.extent(0) == b.extent(0) &&
                   a.extent(2) == b.extent(2) && a.extent(3) == b.extent(3),
               "concat_channels: incompatible shapes ", shape_str(a.shape()), " vs ",
               shape_str(b.shape()));
  const std::int64_t B = a.extent(0), Ca = a.extent(1), Cb = b.extent(1),
                     HW = a.extent(2) * a.extent(3);
  Tensor<S> out({B, Ca + Cb, a.extent(2), a.extent(3)});
  for (std::int64_t i = 0; i < B; ++i) {
    std::copy_n(a.data() + i * Ca * HW, Ca * HW, out.data() + i * (Ca + Cb) * HW);
    std::copy_n(b.data() + i * Cb * HW, Cb * HW, out.data() + (i * (Ca + Cb) + Ca) * HW);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Padding / cropping on the trailing two axes
// ---------------------------------------------------------------------------

template <class S>
Tensor<S> mirror_pad_hw(const Tensor<S>& x, std::int64_t pad_h, std::int64_t pad_w) {
  FQFM_REQUIRE(x.rank() == 4, "mirror_pad_hw: expected rank-4 input, got ", shape_str(x.shape()));
  FQFM_REQUIRE(pad_h >= 0 && pad_w >= 0, "mirror_pad_hw: negative padding");
  const std::int64_t B = x.extent(0), C = x.extent(1), H = x.extent(2), W = x.extent(3);
  Tensor<S> out({B, C, H + pad_h, W + pad_w});
  for (std::int64_t b = 0; b < B; ++b)
    for (std::int64_t c = 0; c < C; ++c)
      for (std::int64_t h = 0; h < H + pad_h; ++h) {
        const std::int64_t sh = mirror_index(h, H);
        for (std::int64_t w = 0; w < W + pad_w; ++w)
          out.at4(b, c, h, w) = x.at4(b, c, sh, mirror_index(w, W));
      }
  return out;
}

// Adjoint of mirror_pad_hw: scatter-add padded-region cotangents back.
template <class S>
Tensor<S> mirror_pad_hw_bwd(const Tensor<S>& g, std::int64_t H, std::int64_t W) {
  FQFM_REQUIRE(g.rank() == 4 && g.extent(2) >= H && g.extent(3) >= W,
               "mirror_pad_hw_bwd: bad cotangent shape ", shape_str(g.shape()));
  Tensor<S> gx({g.extent(0), g.extent(1), H, W});
  for (std::int64_t b = 0; b < g.extent(0); ++b)
    for (std::int64_t c = 0; c < g.extent(1); ++c)
      for (std::int64_t h = 0; h < g.extent(2); ++h) {
        const std::int64_t sh = mirror_index(h, H);
        for (std::int64_t w = 0; w < g.extent(3); ++w)
          gx.at4(b, c, sh, mirror_index(w, W)) += g.at4(b, c, h, w);
      }
  return gx;
}

template <class S>
Tensor<S> zero_pad_hw(const Tensor<S>& x, std::int64_t H2, std::int64_t W2) {
  FQFM_REQUIRE(x.rank() == 4 && H2 >= x.extent(2) && W2 >= x.extent(3),
               "zero_pad_hw: target smaller than input");
  Tensor<S> out({x.extent(0), x.extent(1), H2, W2});
  for (std::int64_t b = 0; b < x.extent(0); ++b)
    for (std::int64_t c = 0; c < x.extent(1); ++c)
      for (std::int64_t h = 0; h < x.extent(2); ++h)
        std::copy_n(&x.at4(b, c, h, 0), x.extent(3), &out.at4(b, c, h, 0));
  return out;
}

template <class S>
Tensor<S> crop_hw(const Tensor<S>& x, std::int64_t H, std::int64_t W) {
  FQFM_REQUIRE(x.rank() == 4 && x.extent(2) >= H && x.extent(3) >= W,
               "crop_hw: target larger than input ", shape_str(x.shape()));
  Tensor<S> out({x.extent(0), x.extent(1), H, W});
  for (std::int64_t b = 0; b < x.extent(0); ++b)
    for (std::int64_t c = 0; c < x.extent(1); ++c)
      for (std::int64_t h = 0; h < H; ++h)
        std::copy_n(&x.at4(b, c, h, 0), W, &out.at4(b, c, h, 0));
  return out;
}

// ---------------------------------------------------------------------------
// Convolutions
// ---------------------------------------------------------------------------

template <class S>
struct ConvParams {
  Tensor<S> weight;  // pointwise [Cout, Cin, 1, 1]; depthwise [C, 1, 3, 3]
  Tensor<S> bias;    // [Cout], empty means no bias
};

template <class S>
Tensor<S> conv_pointwise(const Tensor<S>& x, const Tensor<S>& w, const Tensor<S>& bias) {
  FQFM_REQUIRE(x.rank() == 4, "conv_pointwise: expected rank-4 input, got ", shape_str(x.shape()));
  FQFM_REQUIRE(w.rank() == 4 && w.extent(2) == 1 && w.extent(3) == 1 && w.extent(1) == x.extent(1),
               "conv_pointwise: weight ", shape_str(w.shape()), " does not match input ",
               shape_str(x.shape()));
  const std::int64_t B = x.extent(0), Cin = x.extent(1), HW = x.extent(2) * x.extent(3),
                     Cout = w.extent(0);
  FQFM_REQUIRE(bias.empty() || (bias.rank() == 1 && bias.extent(0) == Cout),
               "conv_pointwise: bias shape ", shape_str(bias.shape()), " does not match Cout ",
               Cout);
  Tensor<S> out({B, Cout, x.extent(2), x.extent(3)});
  CMapRowMat<S> W(w.data(), Cout, Cin);
  for (std::int64_t b = 0; b < B; ++b) {
    CMapRowMat<S> X(x.data() + b * Cin * HW, Cin, HW);
    MapRowMat<S> Y(out.data() + b * Cout * HW, Cout, HW);
    Y.noalias() = W * X;
    if (!bias.empty())
      for (std::int64_t c = 0; c < Cout; ++c) Y.row(c).array() += bias[c];
  }
  instrument::add_flops(2 * B * Cout * Cin * HW + (bias.empty() ? 0 : B * Cout * HW));
  return out;
}

template <class S>
Tensor<S> conv_pointwise(const Tensor<S>& x, const ConvParams<S>& p) {
  return conv_pointwise(x, p.weight, p.bias);
}

template <class S>
void conv_pointwise_bwd(const Tensor<S>& x, const Tensor<S>& w, const Tensor<S>& g, Tensor<S>* gx,
                        Tensor<S>* gw, Tensor<S>* gbias) {
  const std::int64_t B = x.extent(0), Cin = x.extent(1), HW = x.extent(2) * x.extent(3),
                     Cout = w.extent(0);
  CMapRowMat<S> W(w.data(), Cout, Cin);
  if (gx) {
    *gx = Tensor<S>(x.shape());
    for (std::int64_t b = 0; b < B; ++b) {
      CMapRowMat<S> G(g.data() + b * Cout * HW, Cout, HW);
      MapRowMat<S> GX(gx->data() + b * Cin * HW, Cin, HW);
      GX.noalias() = W.transpose() * G;
    }
  }
  if (gw) {
    *gw = Tensor<S>(w.shape());
    MapRowMat<S> GW(gw->data(), Cout, Cin);
    for (std::int64_t b = 0; b < B; ++b) {
      CMapRowMat<S> G(g.data() + b * Cout * HW, Cout, HW);
      CMapRowMat<S> X(x.data() + b * Cin * HW, Cin, HW);
      GW.noalias() += G * X.transpose();
    }
  }
  if (gbias) {
    *gbias = Tensor<S>({Cout});
    for (std::int64_t b = 0; b < B; ++b)
      for (std::int64_t c = 0; c < Cout; ++c) {
        S acc = 0;
        const S* row = g.data() + (b * Cout + c) * HW;
        for (std::int64_t i = 0; i < HW; ++i) acc += row[i];
        (*gbias)[c] += acc;
      }
  }
  instrument::add_flops(4 * B * Cout * Cin * HW);
}

template <class S>
Tensor<S> conv_depthwise3x3(const Tensor<S>& x, const Tensor<S>& w, const Tensor<S>& bias) {
  FQFM_REQUIRE(x.rank() == 4, "conv_depthwise3x3: expected rank-4 input, got ",
               shape_str(x.shape()));
  FQFM_REQUIRE(w.rank() == 4 && w.extent(0) == x.extent(1) && w.extent(1) == 1 &&
                   w.extent(2) == 3 && w.extent(3) == 3,
               "conv_depthwise3x3: weight ", shape_str(w.shape()), " does not match input ",
               shape_str(x.shape()));
  const std::int64_t B = x.extent(0), C = x.extent(1), H = x.extent(2), W = x.extent(3);
  FQFM_REQUIRE(bias.empty() || (bias.rank() == 1 && bias.extent(0) == C),
               "conv_depthwise3x3: bias shape ", shape_str(bias.shape()),
               " does not match channels ", C);
  Tensor<S> out(x.shape());
  for (std::int64_t b = 0; b < B; ++b)
    for (std::int64_t c = 0; c < C; ++c) {
      const S* k = w.data() + c * 9;
      const S bv = bias.empty() ? S(0) : bias[c];
      for (std::int64_t h = 0; h < H; ++h) {
        const std::int64_t h0 = mirror_index(h - 1, H), h1 = h, h2 = mirror_index(h + 1, H);
        for (std::int64_t ww = 0; ww < W; ++ww) {
          const std::int64_t w0 = mirror_index(ww - 1, W), w1 = ww, w2 = mirror_index(ww + 1, W);
          S acc = bv;
          acc += k[0] * x.at4(b, c, h0, w0) + k[1] * x.at4(b, c, h0, w1) +
                 k[2] * x.at4(b, c, h0, w2);
          acc += k[3] * x.at4(b, c, h1, w0) + k[4] * x.at4(b, c, h1, w1) +
                 k[5] * x.at4(b, c, h1, w2);
          acc += k[6] * x.at4(b, c, h2, w0) + k[7] * x.at4(b, c, h2, w1) +
                 k[8] * x.at4(b, c, h2, w2);
          out.at4(b, c, h, ww) = acc;
        }
      }
    }
  instrument::add_flops(18 * x.size());
  return out;
}

template <class S>
Tensor<S> conv_depthwise3x3(const Tensor<S>& x, const ConvParams<S>& p) {
  return conv_depthwise3x3(x, p.weight, p.bias);
}

template <class S>
void conv_depthwise3x3_bwd(const Tensor<S>& x, const Tensor<S>& w, const Tensor<S>& g,
                           Tensor<S>* gx, Tensor<S>* gw, Tensor<S>* gbias) {
  const std::int64_t B = x.extent(0), C = x.extent(1), H = x.extent(2), W = x.extent(3);
  if (gx) *gx = Tensor<S>(x.shape());
  if (gw) *gw = Tensor<S>(w.shape());
  if (gbias) *gbias = Tensor<S>({C});
  for (std::int64_t b = 0; b < B; ++b)
    for (std::int64_t c = 0; c < C; ++c) {
      const S* k = w.data() + c * 9;
      S* gk = gw ? gw->data() + c * 9 : nullptr;
      for (std::int64_t h = 0; h < H; ++h)
        for (std::int64_t ww = 0; ww < W; ++ww) {
          const S go = g.at4(b, c, h, ww);
          if (gbias) (*gbias)[c] += go;
          for (int dy = -1; dy <= 1; ++dy)
            for (int dx = -1; dx <= 1; ++dx) {
              const std::int64_t sh = mirror_index(h + dy, H), sw = mirror_index(ww + dx, W);
              const int ki = (dy + 1) * 3 + (dx + 1);
              if (gx) gx->at4(b, c, sh, sw) += go * k[ki];
              if (gk) gk[ki] += go * x.at4(b, c, sh, sw);
            }
        }
    }
  instrument::add_flops(36 * x.size());
}

// ---------------------------------------------------------------------------
// Layer normalization over the channel axis per spatial position
// ---------------------------------------------------------------------------

inline constexpr double kLayerNormEps = 1e-6;

template <class S>
Tensor<S> layer_norm(const Tensor<S>& x, const Tensor<S>& sc, const Tensor<S>& off) {
  FQFM_REQUIRE(x.rank() == 4 && x.extent(1) >= 1, "layer_norm: expected rank-4 input with >=1 channel, got ",
               shape_str(x.shape()));
  const std::int64_t B = x.extent(0), C = x.extent(1), HW = x.extent(2) * x.extent(3);
  FQFM_REQUIRE(sc.rank() == 1 && sc.extent(0) == C && off.rank() == 1 && off.extent(0) == C,
               "layer_norm: scale/offset must be [", C, "]");
  Tensor<S> out(x.shape());
  for (std::int64_t b = 0; b < B; ++b)
    for (std::int64_t i = 0; i < HW; ++i) {
      double mean = 0;
      for (std::int64_t c = 0; c < C; ++c) mean += x[(b * C + c) * HW + i];
      mean /= static_cast<double>(C);
      double var = 0;
      for (std::int64_t c = 0; c < C; ++c) {
        const double d = static_cast<double>(x[(b * C + c) * HW + i]) - mean;
        var += d * d;
      }
      var /= static_cast<double>(C);
      const double inv = 1.0 / std::sqrt(var + kLayerNormEps);
      for (std::int64_t c = 0; c < C; ++c) {
        const double xh = (static_cast<double>(x[(b * C + c) * HW + i]) - mean) * inv;
        out[(b * C + c) * HW + i] = static_cast<S>(xh * static_cast<double>(sc[c]) +
                                                   static_cast<double>(off[c]));
      }
    }
  instrument::add_flops(8 * x.size());
  return out;
}

template <class S>
void layer_norm_bwd(const Tensor<S>& x, const Tensor<S>& sc, const Tensor<S>& g, Tensor<S>* gx,
                    Tensor<S>* gsc, Tensor<S>* goff) {
  const std::int64_t B = x.extent(0), C = x.extent(1), HW = x.extent(2) * x.extent(3);
  if (gx) *gx = Tensor<S>(x.shape());
  if (gsc) *gsc = Tensor<S>({C});
  if (goff) *goff = Tensor<S>({C});
  std::vector<double> xh(static_cast<std::size_t>(C)), dxh(static_cast<std::size_t>(C));
  for (std::int64_t b = 0; b < B; ++b)
    for (std::int64_t i = 0; i < HW; ++i) {
      double mean = 0;
      for (std::int64_t c = 0; c < C; ++c) mean += x[(b * C + c) * HW + i];
      mean /= static_cast<double>(C);
      double var = 0;
      for (std::int64_t c = 0; c < C; ++c) {
        const double d = static_cast<double>(x[(b * C + c) * HW + i]) - mean;
        var += d * d;
      }
      var /= static_cast<double>(C);
      const double inv = 1.0 / std::sqrt(var + kLayerNormEps);
      double m1 = 0, m2 = 0;
      for (std::int64_t c = 0; c < C; ++c) {
        xh[c] = (static_cast<double>(x[(b * C + c) * HW + i]) - mean) * inv;
        const double go = g[(b * C + c) * HW + i];
        dxh[c] = go * static_cast<double>(sc[c]);
        m1 += dxh[c];
        m2 += dxh[c] * xh[c];
        if (gsc) (*gsc)[c] += static_cast<S>(go * xh[c]);
        if (goff) (*goff)[c] += static_cast<S>(go);
      }
      m1 /= static_cast<double>(C);
      m2 /= static_cast<double>(C);
      if (gx)
        for (std::int64_t c = 0; c < C; ++c)
          (*gx)[(b * C + c) * HW + i] = static_cast<S>(inv * (dxh[c] - m1 - xh[c] * m2));
    }
  instrument::add_flops(16 * x.size());
}

// ---------------------------------------------------------------------------
// Softmax along a chosen axis, max-subtracted
// ---------------------------------------------------------------------------

template <class S>
Tensor<S> softmax(const Tensor<S>& x, int axis) {
  FQFM_REQUIRE(axis >= 0 && axis < x.rank(), "softmax: axis ", axis, " out of range for ",
               shape_str(x.shape()));
  FQFM_REQUIRE(!has_nan(x), "softmax: NaN in input");
  const std::int64_t n = x.extent(axis);
  std::int64_t outer = 1, inner = 1;
  for (int a = 0; a < axis; ++a) outer *= x.extent(a);
  for (int a = axis + 1; a < x.rank(); ++a) inner *= x.extent(a);
  Tensor<S> out(x.shape());
  for (std::int64_t o = 0; o < outer; ++o)
    for (std::int64_t in = 0; in < inner; ++in) {
      const std::int64_t base = o * n * inner + in;
      double mx = -std::numeric_limits<double>::infinity();
      for (std::int64_t i = 0; i < n; ++i)
        mx = std::max(mx, static_cast<double>(x[base + i * inner]));
      double sum = 0;
      for (std::int64_t i = 0; i < n; ++i) {
        const double e = std::exp(static_cast<double>(x[base + i * inner]) - mx);
        out[base + i * inner] = static_cast<S>(e);
        sum += e;
      }
      for (std::int64_t i = 0; i < n; ++i)
        out[base + i * inner] = static_cast<S>(out[base + i * inner] / sum);
    }
  instrument::add_flops(5 * x.size());
  return out;
}

template <class S>
Tensor<S> softmax_bwd(const Tensor<S>& y, const Tensor<S>& g, int axis) {
  const std::int64_t n = y.extent(axis);
  std::int64_t outer = 1, inner = 1;
  for (int a = 0; a < axis; ++a) outer *= y.extent(a);
  for (int a = axis + 1; a < y.rank(); ++a) inner *= y.extent(a);
  Tensor<S> gx(y.shape());
  for (std::int64_t o = 0; o < outer; ++o)
    for (std::int64_t in = 0; in < inner; ++in) {
      const std::int64_t base = o * n * inner + in;
      double dot = 0;
      for (std::int64_t i = 0; i < n; ++i)
        dot += static_cast<double>(g[base + i * inner]) * static_cast<double>(y[base + i * inner]);
      for (std::int64_t i = 0; i < n; ++i)
        gx[base + i * inner] =
            static_cast<S>(static_cast<double>(y[base + i * inner]) *
                           (static_cast<double>(g[base + i * inner]) - dot));
    }
  instrument::add_flops(4 * y.size());
  return gx;
}

// ---------------------------------------------------------------------------
// Patch unfold / fold: non-overlapping tiles, row-major patch order
// ---------------------------------------------------------------------------

// [B,C,H,W] -> [B, num_patches, C, patch, patch]; reflect-pads H,W up to
// multiples of patch first.
template <class S>
Tensor<S> unfold_patches(const Tensor<S>& x, std::int64_t patch) {
  FQFM_REQUIRE(x.rank() == 4, "unfold_patches: expected rank-4 input, got ", shape_str(x.shape()));
  FQFM_REQUIRE(patch >= 1, "unfold_patches: patch must be >= 1, got ", patch);
  const std::int64_t B = x.extent(0), C = x.extent(1), H = x.extent(2), W = x.extent(3);
  const std::int64_t Hp = (H + patch - 1) / patch * patch, Wp = (W + patch - 1) / patch * patch;
  FQFM_REQUIRE(patch <= Hp && patch <= Wp, "unfold_patches: patch ", patch,
               " exceeds padded extents ", Hp, "x", Wp);
  const std::int64_t nh = Hp / patch, nw = Wp / patch, NP = nh * nw;
  Tensor<S> out({B, NP, C, patch, patch});
  for (std::int64_t b = 0; b < B; ++b)
    for (std::int64_t ph = 0; ph < nh; ++ph)
      for (std::int64_t pw = 0; pw < nw; ++pw) {
        const std::int64_t np = ph * nw + pw;
        for (std::int64_t c = 0; c < C; ++c)
          for (std::int64_t py = 0; py < patch; ++py) {
            const std::int64_t sh = mirror_index(ph * patch + py, H);
            S* dst = out.data() + (((b * NP + np) * C + c) * patch + py) * patch;
            for (std::int64_t px = 0; px < patch; ++px)
              dst[px] = x.at4(b, c, sh, mirror_index(pw * patch + px, W));
          }
      }
  return out;
}

// Adjoint of unfold_patches: scatter-add patch cotangents through the mirror map.
template <class S>
Tensor<S> unfold_patches_bwd(const Tensor<S>& g, const Shape& x_shape, std::int64_t patch) {
  const std::int64_t B = x_shape[0], C = x_shape[1], H = x_shape[2], W = x_shape[3];
  const std::int64_t Hp = (H + patch - 1) / patch * patch, Wp = (W + patch - 1) / patch * patch;
  const std::int64_t nh = Hp / patch, nw = Wp / patch, NP = nh * nw;
  FQFM_REQUIRE(g.rank() == 5 && g.extent(0) == B && g.extent(1) == NP && g.extent(2) == C &&
                   g.extent(3) == patch && g.extent(4) == patch,
               "unfold_patches_bwd: cotangent shape ", shape_str(g.shape()),
               " inconsistent with input ", shape_str(x_shape));
  Tensor<S> gx(x_shape);
  for (std::int64_t b = 0; b < B; ++b)
    for (std::int64_t ph = 0; ph < nh; ++ph)
      for (std::int64_t pw = 0; pw < nw; ++pw) {
        const std::int64_t np = ph * nw + pw;
        for (std::int64_t c = 0; c < C; ++c)
          for (std::int64_t py = 0; py < patch; ++py) {
            const std::int64_t sh = mirror_index(ph * patch + py, H);
            const S* src = g.data() + (((b * NP + np) * C + c) * patch + py) * patch;
            for (std::int64_t px = 0; px < patch; ++px)
              gx.at4(b, c, sh, mirror_index(pw * patch + px, W)) += src[px];
          }
      }
  return gx;
}

// [B, num_patches, C, patch, patch] -> [B,C,H,W]; crops the padding added by
// unfold_patches.
template <class S>
Tensor<S> fold_patches(const Tensor<S>& p, const Shape& x_shape) {
  FQFM_REQUIRE(p.rank() == 5, "fold_patches: expected rank-5 patches, got ", shape_str(p.shape()));
  FQFM_REQUIRE(x_shape.size() == 4, "fold_patches: target shape must be rank 4");
  const std::int64_t B = x_shape[0], C = x_shape[1], H = x_shape[2], W = x_shape[3];
  const std::int64_t patch = p.extent(3);
  const std::int64_t Hp = (H + patch - 1) / patch * patch, Wp = (W + patch - 1) / patch * patch;
  const std::int64_t nh = Hp / patch, nw = Wp / patch, NP = nh * nw;
  FQFM_REQUIRE(p.extent(0) == B && p.extent(1) == NP && p.extent(2) == C && p.extent(4) == patch,
               "fold_patches: patches ", shape_str(p.shape()), " inconsistent with target ",
               shape_str(x_shape));
  Tensor<S> out(x_shape);
  for (std::int64_t b = 0; b < B; ++b)
    for (std::int64_t ph = 0; ph < nh; ++ph)
      for (std::int64_t pw = 0; pw < nw; ++pw) {
        const std::int64_t np = ph * nw + pw;
        for (std::int64_t c = 0; c < C; ++c)
          for (std::int64_t py = 0; py < patch; ++py) {
            const std::int64_t h = ph * patch + py;
            if (h >= H) continue;
            const S* src = p.data() + (((b * NP + np) * C + c) * patch + py) * patch;
            const std::int64_t wlim = std::min(patch, W - pw * patch);
            for (std::int64_t px = 0; px < wlim; ++px) out.at4(b, c, h, pw * patch + px) = src[px];
          }
      }
  return out;
}

// Adjoint of fold_patches: tile the cotangent, zero where padding was cropped.
template <class S>
Tensor<S> fold_patches_bwd(const Tensor<S>& g, std::int64_t patch) {
  const std::int64_t B = g.extent(0), C = g.extent(1), H = g.extent(2), W = g.extent(3);
  const std::int64_t Hp = (H + patch - 1) / patch * patch, Wp = (W + patch - 1) / patch * patch;
  const std::int64_t nh = Hp / patch, nw = Wp / patch, NP = nh * nw;
  Tensor<S> gp({B, NP, C, patch, patch});
  for (std::int64_t b = 0; b < B; ++b)
    for (std::int64_t ph = 0; ph < nh; ++ph)
      for (std::int64_t pw = 0; pw < nw; ++pw) {
        const std::int64_t np = ph * nw + pw;
        for (std::int64_t c = 0; c < C; ++c)
          for (std::int64_t py = 0; py < patch; ++py) {
            const std::int64_t h = ph * patch + py;
            if (h >= H) continue;
            S* dst = gp.data() + (((b * NP + np) * C + c) * patch + py) * patch;
            const std::int64_t wlim = std::min(patch, W - pw * patch);
            for (std::int64_t px = 0; px < wlim; ++px) dst[px] = g.at4(b, c, h, pw * patch + px);
          }
      }
  return gp;
}

// ---------------------------------------------------------------------------
// GEGLU gate (exact erf GELU)
// ---------------------------------------------------------------------------

inline double gelu_exact(double x) { return 0.5 * x * (1.0 + std::erf(x * M_SQRT1_2)); }

inline double gelu_grad(double x) {
  const double phi = std::exp(-0.5 * x * x) / std::sqrt(2.0 * M_PI);
  return 0.5 * (1.0 + std::erf(x * M_SQRT1_2)) + x * phi;
}

// Splits channels into halves (a, b); returns a ⊙ GELU(b).
template <class S>
Tensor<S> geglu(const Tensor<S>& x) {
  FQFM_REQUIRE(x.rank() == 4, "geglu: expected rank-4 input, got ", shape_str(x.shape()));
  FQFM_REQUIRE(x.extent(1) % 2 == 0, "geglu: channel count must be even, got ", x.extent(1));
  const std::int64_t B = x.extent(0), C = x.extent(1) / 2, HW = x.extent(2) * x.extent(3);
  Tensor<S> out({B, C, x.extent(2), x.extent(3)});
  for (std::int64_t b = 0; b < B; ++b)
    for (std::int64_t c = 0; c < C; ++c) {
      const S* pa = x.data() + (b * 2 * C + c) * HW;
      const S* pb = x.data() + (b * 2 * C + C + c) * HW;
      S* po = out.data() + (b * C + c) * HW;
      for (std::int64_t i = 0; i < HW; ++i)
        po[i] = static_cast<S>(static_cast<double>(pa[i]) * gelu_exact(pb[i]));
    }
  instrument::add_flops(10 * out.size());
  return out;
}

template <class S>
Tensor<S> geglu_bwd(const Tensor<S>& x, const Tensor<S>& g) {
  const std::int64_t B = x.extent(0), C = x.extent(1) / 2, HW = x.extent(2) * x.extent(3);
  Tensor<S> gx(x.shape());
  for (std::int64_t b = 0; b < B; ++b)
    for (std::int64_t c = 0; c < C; ++c) {
      const S* pa = x.data() + (b * 2 * C + c) * HW;
      const S* pb = x.data() + (b * 2 * C + C + c) * HW;
      S* ga = gx.data() + (b * 2 * C + c) * HW;
      S* gb = gx.data() + (b * 2 * C + C + c) * HW;
      const S* pg = g.data() + (b * C + c) * HW;
      for (std::int64_t i = 0; i < HW; ++i) {
        ga[i] = static_cast<S>(static_cast<double>(pg[i]) * gelu_exact(pb[i]));
        gb[i] = static_cast<S>(static_cast<double>(pg[i]) * static_cast<double>(pa[i]) *
                               gelu_grad(pb[i]));
      }
    }
  instrument::add_flops(20 * g.size());
  return gx;
}

// ---------------------------------------------------------------------------
// Space-depth permutations (factor 2)
// ---------------------------------------------------------------------------

// [B,C,H,W] -> [B,4C,H/2,W/2]; output channel c*4 + dy*2 + dx.
template <class S>
Tensor<S> space_to_depth(const Tensor<S>& x) {
  FQFM_REQUIRE(x.rank() == 4 && x.extent(2) % 2 == 0 && x.extent(3) % 2 == 0,
               "space_to_depth: H and W must be even, got ", shape_str(x.shape()));
  const std::int64_t B = x.extent(0), C = x.extent(1), H = x.extent(2) / 2, W = x.extent(3) / 2;
  Tensor<S> out({B, 4 * C, H, W});
  for (std::int64_t b = 0; b < B; ++b)
    for (std::int64_t c = 0; c < C; ++c)
      for (int dy = 0; dy < 2; ++dy)
        for (int dx = 0; dx < 2; ++dx) {
          const std::int64_t co = c * 4 + dy * 2 + dx;
          for (std::int64_t h = 0; h < H; ++h)
            for (std::int64_t w = 0; w < W; ++w)
              out.at4(b, co, h, w) = x.at4(b, c, 2 * h + dy, 2 * w + dx);
        }
  return out;
}

// Inverse of space_to_depth. [B,4C,H,W] -> [B,C,2H,2W].
template <class S>
Tensor<S> depth_to_space(const Tensor<S>& x) {
  FQFM_REQUIRE(x.rank() == 4 && x.extent(1) % 4 == 0,
               "depth_to_space: channel count must be divisible by 4, got ", shape_str(x.shape()));
  const std::int64_t B = x.extent(0), C = x.extent(1) / 4, H = x.extent(2), W = x.extent(3);
  Tensor<S> out({B, C, 2 * H, 2 * W});
  for (std::int64_t b = 0; b < B; ++b)
    for (std::int64_t c = 0; c < C; ++c)
      for (int dy = 0; dy < 2; ++dy)
        for (int dx = 0; dx < 2; ++dx) {
          const std::int64_t ci = c * 4 + dy * 2 + dx;
          for (std::int64_t h = 0; h < H; ++h)
            for (std::int64_t w = 0; w < W; ++w)
              out.at4(b, c, 2 * h + dy, 2 * w + dx) = x.at4(b, ci, h, w);
        }
  return out;
}

// ---------------------------------------------------------------------------
// Resolution changes used by the hourglass network
// ---------------------------------------------------------------------------

// space_to_depth then pointwise conv; [B,C,H,W] -> [B, Cout, H/2, W/2].
template <class S>
Tensor<S> downsample(const Tensor<S>& x, const ConvParams<S>& p) {
  return conv_pointwise(space_to_depth(x), p);
}

// pointwise conv then depth_to_space; [B,C,H,W] -> [B, Cout/4, 2H, 2W].
template <class S>
Tensor<S> upsample(const Tensor<S>& x, const ConvParams<S>& p) {
  return depth_to_space(conv_pointwise(x, p));
}

// ---------------------------------------------------------------------------
// Reductions used by the training objective
// ---------------------------------------------------------------------------

template <class S>
double sum_all_value(const Tensor<S>& x) {
  double acc = 0;
  for (std::int64_t i = 0; i < x.size(); ++i) acc += x[i];
  instrument::add_flops(x.size());
  return acc;
}

template <class S>
double l1_mean(const Tensor<S>& a, const Tensor<S>& b) {
  FQFM_REQUIRE(a.shape() == b.shape(), "l1_mean: shape mismatch ", shape_str(a.shape()), " vs ",
               shape_str(b.shape()));
  double acc = 0;
  for (std::int64_t i = 0; i < a.size(); ++i)
    acc += std::abs(static_cast<double>(a[i]) - static_cast<double>(b[i]));
  instrument::add_flops(2 * a.size());
  return acc / static_cast<double>(a.size());
}

}  // namespace fqfm
