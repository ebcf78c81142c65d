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

#include "fqfm/exec.hpp"

namespace fqfm {

/// Frequency-domain attention block on [B,C,H,W]:
///   F = depthwise3x3(pointwise(x)) projected to 3C channels, split into
///   query/key/value thirds; per 8x8 patch per channel the correlation map
///   A = ifft2(fft2(q) * conj(fft2(k))) replaces the token-pair product;
///   output = x + pointwise(layer_norm(A) * v).
/// Expects parameters under prefix: .qkv_point, .qkv_depth, .out_proj, .norm.
template <class E>
typename E::V fsas_block(E& e, const typename E::V& x, const std::string& prefix,
                         std::int64_t patch) {
  FQFM_REQUIRE(is_pow2(patch), "fsas_block: patch must be a power of two, got ", patch);
  const Shape xs = e.shape_of(x);
  FQFM_REQUIRE(xs.size() == 4, "fsas_block: expected rank-4 input, got ", shape_str(xs));
  const std::int64_t C = xs[1];

  auto qkv = e.conv_dw(e.conv_pw(x, prefix + ".qkv_point"), prefix + ".qkv_depth");
  FQFM_REQUIRE(e.shape_of(qkv)[1] == 3 * C, "fsas_block: projection must produce 3x channels");
  auto fq = e.slice_ch(qkv, 0, C);
  auto fk = e.slice_ch(qkv, C, 2 * C);
  auto fv = e.slice_ch(qkv, 2 * C, 3 * C);

  auto qp = e.unfold(fq, patch);
  auto kp = e.unfold(fk, patch);
  e.note(prefix + ".q_patches", qp);
  e.note(prefix + ".k_patches", kp);

  auto corr = e.ifft2(e.cmul_conj(e.fft2(qp), e.fft2(kp)));
  e.note(prefix + ".corr_patches", corr);

  auto a = e.fold(corr, e.shape_of(fq));
  auto v_att = e.mul(e.norm(a, prefix + ".norm"), fv);
  return e.add(x, e.conv_pw(v_att, prefix + ".out_proj"));
}

namespace init {

template <class S>
void fsas_params(ParameterStore<S>& ps, const std::string& prefix, std::int64_t c,
                 std::uint64_t seed) {
  conv_pointwise_params(ps, prefix + ".qkv_point", 3 * c, c, seed);
  conv_depthwise_params(ps, prefix + ".qkv_depth", 3 * c, seed);
  conv_pointwise_params(ps, prefix + ".out_proj", c, c, seed);
  norm_params(ps, prefix + ".norm", c);
}

}  // namespace init

inline std::int64_t fsas_param_count(std::int64_t c) {
  const std::int64_t qkv_point = c * 3 * c + 3 * c;
  const std::int64_t qkv_depth = 9 * 3 * c + 3 * c;
  const std::int64_t out_proj = c * c + c;
  const std::int64_t norm = 2 * c;
  return qkv_point + qkv_depth + out_proj + norm;
}

// ---------------------------------------------------------------------------
// Quadratic attention references
// ---------------------------------------------------------------------------

/// softmax(Q K^T / denom) V on token rows; Q,K [N,D], V [N,Dv].
/// Counts N*N token pairs. Optionally emits the attention map.
template <class S>
Tensor<S> scaled_dot_attention(const Tensor<S>& q, const Tensor<S>& k, const Tensor<S>& v,
                               double denom, Tensor<S>* attn_out = nullptr) {
  FQFM_REQUIRE(q.rank() == 2 && k.rank() == 2 && v.rank() == 2, "scaled_dot_attention: rank-2 only");
  FQFM_REQUIRE(q.extent(1) == k.extent(1) && k.extent(0) == v.extent(0),
               "scaled_dot_attention: shape mismatch ", shape_str(q.shape()), " ",
               shape_str(k.shape()), " ", shape_str(v.shape()));
  const std::int64_t N = q.extent(0), M = k.extent(0), D = q.extent(1), Dv = v.extent(1);
  // Plain loops, not a tuned GEMM: reference-grade arithmetic whose throughput
  // does not drift with matrix size, so measured scaling reflects the N*M
  // operation count.
  Tensor<S> scores({N, M});
  const S inv_denom = static_cast<S>(1.0 / denom);
  for (std::int64_t i = 0; i < N; ++i)
    for (std::int64_t j = 0; j < M; ++j) {
      S acc = 0;
      const S* qi = q.data() + i * D;
      const S* kj = k.data() + j * D;
      for (std::int64_t d = 0; d < D; ++d) acc += qi[d] * kj[d];
      scores[i * M + j] = acc * inv_denom;
    }
  Tensor<S> attn = softmax(scores, 1);
  Tensor<S> out({N, Dv});
  for (std::int64_t i = 0; i < N; ++i) {
    S* oi = out.data() + i * Dv;
    for (std::int64_t m = 0; m < M; ++m) {
      const S a = attn[i * M + m];
      const S* vm = v.data() + m * Dv;
      for (std::int64_t d = 0; d < Dv; ++d) oi[d] += a * vm[d];
    }
  }
  instrument::add_pairs(N * M);
  instrument::add_flops(2 * N * M * D + 2 * N * M * Dv);
  if (attn_out) *attn_out = std::move(attn);
  return out;
}

template <class S>
struct QkvProjection {
  ConvParams<S> point;  // C -> 3C
  ConvParams<S> depth;  // depthwise over 3C
};

template <class S>
QkvProjection<S> random_qkv_projection(std::int64_t c, std::uint64_t seed) {
  QkvProjection<S> p;
  p.point.weight = init::uniform_fan_in<S>({3 * c, c, 1, 1}, c, seed, "oracle.point.w");
  p.point.bias = Tensor<S>({3 * c});
  p.depth.weight = init::uniform_fan_in<S>({3 * c, 1, 3, 3}, 9, seed, "oracle.depth.w");
  p.depth.bias = Tensor<S>({3 * c});
  return p;
}

/// Exact patch-token attention over the full plane: patches of H_p x W_p are
/// flattened to rows of length C*H_p*W_p, attended with denominator
/// sqrt(C*H_p*W_p), and folded back. O(N^2) in the patch count; refuses to run
/// above `token_cap`.
template <class S>
Tensor<S> spatial_attention_oracle(const Tensor<S>& x, const QkvProjection<S>& p, std::int64_t hp,
                                   std::int64_t wp, std::int64_t token_cap = 4096,
                                   Tensor<S>* attn_out = nullptr) {
  FQFM_REQUIRE(x.rank() == 4, "spatial_attention_oracle: expected rank-4 input");
  const std::int64_t B = x.extent(0), C = x.extent(1);
  FQFM_REQUIRE(hp == wp, "spatial_attention_oracle: square patches only, got ", hp, "x", wp);
  Tensor<S> f = conv_depthwise3x3(conv_pointwise(x, p.point), p.depth);
  Tensor<S> q = unfold_patches(slice_channels(f, 0, C), hp);
  Tensor<S> k = unfold_patches(slice_channels(f, C, 2 * C), hp);
  Tensor<S> v = unfold_patches(slice_channels(f, 2 * C, 3 * C), hp);
  const std::int64_t NP = q.extent(1), D = C * hp * wp;
  FQFM_REQUIRE(NP <= token_cap, "spatial_attention_oracle: ", NP, " tokens exceed cap ",
               token_cap);
  const double denom = std::sqrt(static_cast<double>(D));
  Tensor<S> out_patches(q.shape());
  for (std::int64_t b = 0; b < B; ++b) {
    Tensor<S> qb({NP, D}), kb({NP, D}), vb({NP, D});
    std::copy_n(q.data() + b * NP * D, NP * D, qb.data());
    std::copy_n(k.data() + b * NP * D, NP * D, kb.data());
    std::copy_n(v.data() + b * NP * D, NP * D, vb.data());
    Tensor<S> ob = scaled_dot_attention(qb, kb, vb, denom, b == 0 ? attn_out : nullptr);
    std::copy_n(ob.data(), NP * D, out_patches.data() + b * NP * D);
  }
  return fold_patches(out_patches, x.shape());
}

/// Pixel-token attention restricted to non-overlapping `window` x `window`
/// tiles. Each tile is projected and attended in isolation (mirror padding at
/// tile borders), so nothing crosses a window boundary.
template <class S>
Tensor<S> window_attention_forward(const Tensor<S>& x, std::int64_t window,
                                   const QkvProjection<S>& p) {
  FQFM_REQUIRE(x.rank() == 4, "window_attention_forward: expected rank-4 input");
  FQFM_REQUIRE(window >= 1, "window_attention_forward: window must be >= 1, got ", window);
  const std::int64_t B = x.extent(0), C = x.extent(1), H = x.extent(2), W = x.extent(3);
  const std::int64_t Hp = (H + window - 1) / window * window,
                     Wp = (W + window - 1) / window * window;
  FQFM_REQUIRE(window <= Hp && window <= Wp, "window_attention_forward: window ", window,
               " larger than padded plane ", Hp, "x", Wp);
  Tensor<S> xp = mirror_pad_hw(x, Hp - H, Wp - W);
  Tensor<S> out(xp.shape());
  const std::int64_t T = window * window;
  const double denom = std::sqrt(static_cast<double>(C));
  for (std::int64_t b = 0; b < B; ++b)
    for (std::int64_t wy = 0; wy < Hp / window; ++wy)
      for (std::int64_t wx = 0; wx < Wp / window; ++wx) {
        Tensor<S> tile({1, C, window, window});
        for (std::int64_t c = 0; c < C; ++c)
          for (std::int64_t i = 0; i < window; ++i)
            std::copy_n(&xp.at4(b, c, wy * window + i, wx * window), window,
                        &tile.at4(0, c, i, 0));
        Tensor<S> f = conv_depthwise3x3(conv_pointwise(tile, p.point), p.depth);
        Tensor<S> q({T, C}), k({T, C}), v({T, C});
        for (std::int64_t c = 0; c < C; ++c)
          for (std::int64_t t = 0; t < T; ++t) {
            q[t * C + c] = f[(0 * 3 * C + c) * T + t];
            k[t * C + c] = f[(C + c) * T + t];
            v[t * C + c] = f[(2 * C + c) * T + t];
          }
        Tensor<S> o = scaled_dot_attention(q, k, v, denom);
        for (std::int64_t c = 0; c < C; ++c)
          for (std::int64_t i = 0; i < window; ++i)
            for (std::int64_t j = 0; j < window; ++j)
              out.at4(b, c, wy * window + i, wx * window + j) = o[(i * window + j) * C + c];
      }
  return crop_hw(out, H, W);
}

}  // namespace fqfm
