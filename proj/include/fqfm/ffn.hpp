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

/// Feed-forward block with a learnable per-frequency gate on [B,C,H,W]:
///   x1 = pointwise(layer_norm(x)) expanding C -> e*C; each 8x8 patch of x1
///   is transformed, scaled bin-wise by the real weight tensor quant_w
///   (shared across patches, distinct per channel), transformed back, and
///   folded; a GEGLU halves the channels back before the residual add.
/// Parameters under prefix: .norm, .expand, .quant_w, and .out_proj when the
/// GEGLU output width differs from C.
template <class E>
typename E::V dffn_block(E& e, const typename E::V& x, const std::string& prefix,
                         std::int64_t patch, std::int64_t expansion) {
  const Shape xs = e.shape_of(x);
  FQFM_REQUIRE(xs.size() == 4, "dffn_block: expected rank-4 input, got ", shape_str(xs));
  const std::int64_t C = xs[1], CE = C * expansion;
  FQFM_REQUIRE(CE % 2 == 0, "dffn_block: expanded channels must be even, got ", CE);
  auto x1 = e.conv_pw(e.norm(x, prefix + ".norm"), prefix + ".expand");
  auto p = e.unfold(x1, patch);
  auto x2 = e.fold(e.ifft2(e.spec_scale(e.fft2(p), prefix + ".quant_w")), e.shape_of(x1));
  auto g = e.geglu(x2);
  if (CE / 2 != C) g = e.conv_pw(g, prefix + ".out_proj");
  return e.add(x, g);
}

/// Baseline without the spectral stage: norm -> expand -> GEGLU -> residual.
template <class E>
typename E::V ffn_block(E& e, const typename E::V& x, const std::string& prefix,
                        std::int64_t expansion) {
  const Shape xs = e.shape_of(x);
  FQFM_REQUIRE(xs.size() == 4, "ffn_block: expected rank-4 input, got ", shape_str(xs));
  const std::int64_t C = xs[1], CE = C * expansion;
  FQFM_REQUIRE(CE % 2 == 0, "ffn_block: expanded channels must be even, got ", CE);
  auto g = e.geglu(e.conv_pw(e.norm(x, prefix + ".norm"), prefix + ".expand"));
  if (CE / 2 != C) g = e.conv_pw(g, prefix + ".out_proj");
  return e.add(x, g);
}

namespace init {

template <class S>
void dffn_params(ParameterStore<S>& ps, const std::string& prefix, std::int64_t c,
                 std::int64_t expansion, std::int64_t patch, std::uint64_t seed) {
  norm_params(ps, prefix + ".norm", c);
  conv_pointwise_params(ps, prefix + ".expand", c * expansion, c, seed);
  ps.put(prefix + ".quant_w", Tensor<S>::full({c * expansion, patch, patch}, S(1)));
  if (c * expansion / 2 != c)
    conv_pointwise_params(ps, prefix + ".out_proj", c, c * expansion / 2, seed);
}

template <class S>
void ffn_params(ParameterStore<S>& ps, const std::string& prefix, std::int64_t c,
                std::int64_t expansion, std::uint64_t seed) {
  norm_params(ps, prefix + ".norm", c);
  conv_pointwise_params(ps, prefix + ".expand", c * expansion, c, seed);
  if (c * expansion / 2 != c)
    conv_pointwise_params(ps, prefix + ".out_proj", c, c * expansion / 2, seed);
}

}  // namespace init

inline std::int64_t dffn_param_count(std::int64_t c, std::int64_t expansion, std::int64_t patch) {
  std::int64_t n = 2 * c;
  n += c * (c * expansion) + c * expansion;
  n += c * expansion * patch * patch;
  if (c * expansion / 2 != c) n += (c * expansion / 2) * c + c;
  return n;
}

inline std::int64_t ffn_param_count(std::int64_t c, std::int64_t expansion) {
  std::int64_t n = 2 * c;
  n += c * (c * expansion) + c * expansion;
  if (c * expansion / 2 != c) n += (c * expansion / 2) * c + c;
  return n;
}

}  // namespace fqfm
