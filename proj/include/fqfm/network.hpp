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

#include "fqfm/attention.hpp"
#include "fqfm/ffn.hpp"

namespace fqfm {

enum class FsasPlacement { none, decoder_only, encoder_and_decoder };
enum class FfnVariant { dffn, plain_ffn };

inline std::string to_string(FsasPlacement p) {
  switch (p) {
    case FsasPlacement::none: return "none";
    case FsasPlacement::decoder_only: return "decoder_only";
    case FsasPlacement::encoder_and_decoder: return "encoder_and_decoder";
  }
  return "?";
}

inline std::string to_string(FfnVariant v) {
  return v == FfnVariant::dffn ? "dffn" : "plain_ffn";
}

inline FsasPlacement fsas_placement_from(const std::string& s) {
  if (s == "none") return FsasPlacement::none;
  if (s == "decoder_only") return FsasPlacement::decoder_only;
  if (s == "encoder_and_decoder") return FsasPlacement::encoder_and_decoder;
  FQFM_REQUIRE(false, "fsas_placement: unknown value '", s, "'");
  return FsasPlacement::none;
}

inline FfnVariant ffn_variant_from(const std::string& s) {
  if (s == "dffn") return FfnVariant::dffn;
  if (s == "plain_ffn") return FfnVariant::plain_ffn;
  FQFM_REQUIRE(false, "ffn_variant: unknown value '", s, "'");
  return FfnVariant::dffn;
}

/// Hourglass topology: gated feed-forward blocks at every scale, frequency
/// attention where `fsas_placement` says, channel width doubling per scale.
struct NetworkConfig {
  std::int64_t scales = 3;
  std::vector<std::int64_t> enc_blocks = {2, 2, 2};
  std::vector<std::int64_t> dec_blocks = {2, 2, 2};
  std::int64_t base_channels = 16;
  FsasPlacement fsas_placement = FsasPlacement::decoder_only;
  FfnVariant ffn_variant = FfnVariant::dffn;
  std::int64_t patch = 8;
  std::int64_t expansion = 2;

  std::int64_t channels_at(std::int64_t scale) const { return base_channels << scale; }
  std::int64_t pad_multiple() const { return patch << (scales - 1); }

  void validate() const {
    FQFM_REQUIRE(scales >= 1, "config field scales: must be >= 1, got ", scales);
    FQFM_REQUIRE(base_channels >= 2 && base_channels % 2 == 0,
                 "config field base_channels: must be even and >= 2, got ", base_channels);
    FQFM_REQUIRE(static_cast<std::int64_t>(enc_blocks.size()) == scales,
                 "config field enc_blocks: need ", scales, " entries, got ", enc_blocks.size());
    FQFM_REQUIRE(static_cast<std::int64_t>(dec_blocks.size()) == scales,
                 "config field dec_blocks: need ", scales, " entries, got ", dec_blocks.size());
    for (std::int64_t n : enc_blocks)
      FQFM_REQUIRE(n >= 1, "config field enc_blocks: all counts must be >= 1");
    for (std::int64_t n : dec_blocks)
      FQFM_REQUIRE(n >= 1, "config field dec_blocks: all counts must be >= 1");
    FQFM_REQUIRE(is_pow2(patch), "config field patch: must be a power of two, got ", patch);
    FQFM_REQUIRE(expansion >= 1, "config field expansion: must be >= 1, got ", expansion);
    for (std::int64_t s = 0; s < scales; ++s)
      FQFM_REQUIRE(channels_at(s) * expansion % 2 == 0,
                   "config field expansion: expanded channels must be even at scale ", s);
  }
};

namespace detail {

inline std::string block_prefix(const char* side, std::int64_t scale, std::int64_t block) {
  return std::string(side) + ".s" + std::to_string(scale) + ".b" + std::to_string(block);
}

template <class S>
void add_block_params(ParameterStore<S>& ps, const NetworkConfig& cfg, const std::string& prefix,
                      std::int64_t c, bool with_fsas, std::uint64_t seed) {
  if (with_fsas) init::fsas_params(ps, prefix + ".fsas", c, seed);
  if (cfg.ffn_variant == FfnVariant::dffn)
    init::dffn_params(ps, prefix + ".dffn", c, cfg.expansion, cfg.patch, seed);
  else
    init::ffn_params(ps, prefix + ".ffn", c, cfg.expansion, seed);
}

}  // namespace detail

template <class S>
struct Model {
  NetworkConfig cfg;
  ParameterStore<S> params;
};

template <class S>
Model<S> build(const NetworkConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  Model<S> m{cfg, {}};
  ParameterStore<S>& ps = m.params;
  const std::int64_t C0 = cfg.base_channels;
  init::conv_pointwise_params(ps, "in_conv", C0, 3, seed);
  const bool enc_fsas = cfg.fsas_placement == FsasPlacement::encoder_and_decoder;
  const bool dec_fsas = cfg.fsas_placement != FsasPlacement::none;
  for (std::int64_t s = 0; s < cfg.scales; ++s) {
    const std::int64_t c = cfg.channels_at(s);
    for (std::int64_t b = 0; b < cfg.enc_blocks[s]; ++b)
      detail::add_block_params(ps, cfg, detail::block_prefix("enc", s, b), c, enc_fsas, seed);
    if (s + 1 < cfg.scales)
      init::conv_pointwise_params(ps, "down.s" + std::to_string(s), 2 * c, 4 * c, seed);
  }
  for (std::int64_t s = cfg.scales - 1; s >= 0; --s) {
    const std::int64_t c = cfg.channels_at(s);
    for (std::int64_t b = 0; b < cfg.dec_blocks[s]; ++b)
      detail::add_block_params(ps, cfg, detail::block_prefix("dec", s, b), c, dec_fsas, seed);
    if (s > 0) {
      init::conv_pointwise_params(ps, "up.s" + std::to_string(s - 1), 2 * c, c, seed);
      init::conv_pointwise_params(ps, "fuse.s" + std::to_string(s - 1), c / 2, c, seed);
    }
  }
  init::conv_pointwise_zero(ps, "out_conv", 3, C0);
  return m;
}

/// Closed-form parameter total for a config; build() must enumerate exactly
/// this many scalars.
inline std::int64_t param_count(const NetworkConfig& cfg) {
  cfg.validate();
  auto pw = [](std::int64_t cin, std::int64_t cout) { return cin * cout + cout; };
  const std::int64_t C0 = cfg.base_channels;
  std::int64_t n = pw(3, C0) + pw(C0, 3);
  auto block = [&](std::int64_t c, bool with_fsas) {
    std::int64_t k = with_fsas ? fsas_param_count(c) : 0;
    k += cfg.ffn_variant == FfnVariant::dffn ? dffn_param_count(c, cfg.expansion, cfg.patch)
                                             : ffn_param_count(c, cfg.expansion);
    return k;
  };
  const bool enc_fsas = cfg.fsas_placement == FsasPlacement::encoder_and_decoder;
  const bool dec_fsas = cfg.fsas_placement != FsasPlacement::none;
  for (std::int64_t s = 0; s < cfg.scales; ++s) {
    const std::int64_t c = cfg.channels_at(s);
    n += cfg.enc_blocks[s] * block(c, enc_fsas);
    n += cfg.dec_blocks[s] * block(c, dec_fsas);
    if (s + 1 < cfg.scales) {
      n += pw(4 * c, 2 * c);          // down.s{s}
      n += pw(2 * c, 4 * c);          // up.s{s}: pointwise before depth_to_space
      n += pw(2 * c, c);              // fuse.s{s}
    }
  }
  return n;
}

/// One full restoration pass, written against the executor surface so the
/// direct and recorded paths share every arithmetic step. Input [B,3,H,W];
/// output same shape, internally padded to a multiple of patch * 2^(scales-1).
template <class E>
typename E::V forward_net(E& e, const NetworkConfig& cfg, const typename E::V& input) {
  cfg.validate();
  const Shape in_shape = e.shape_of(input);
  FQFM_REQUIRE(in_shape.size() == 4 && in_shape[1] == 3,
               "forward_net: expected [B,3,H,W] input, got ", shape_str(in_shape));
  const std::int64_t H = in_shape[2], W = in_shape[3], mult = cfg.pad_multiple();
  const std::int64_t Hp = (H + mult - 1) / mult * mult, Wp = (W + mult - 1) / mult * mult;

  auto run_block = [&](typename E::V v, const std::string& prefix, bool with_fsas) {
    if (with_fsas) v = fsas_block(e, v, prefix + ".fsas", cfg.patch);
    return cfg.ffn_variant == FfnVariant::dffn
               ? dffn_block(e, v, prefix + ".dffn", cfg.patch, cfg.expansion)
               : ffn_block(e, v, prefix + ".ffn", cfg.expansion);
  };
  const bool enc_fsas = cfg.fsas_placement == FsasPlacement::encoder_and_decoder;
  const bool dec_fsas = cfg.fsas_placement != FsasPlacement::none;

  auto padded = e.pad_mirror(input, Hp - H, Wp - W);
  auto cur = e.conv_pw(padded, "in_conv");
  std::vector<typename E::V> skips;
  for (std::int64_t s = 0; s < cfg.scales; ++s) {
    for (std::int64_t b = 0; b < cfg.enc_blocks[s]; ++b)
      cur = run_block(cur, detail::block_prefix("enc", s, b), enc_fsas);
    if (s + 1 < cfg.scales) {
      skips.push_back(cur);
      cur = e.conv_pw(e.s2d(cur), "down.s" + std::to_string(s));
    }
  }
  for (std::int64_t s = cfg.scales - 1; s >= 0; --s) {
    for (std::int64_t b = 0; b < cfg.dec_blocks[s]; ++b)
      cur = run_block(cur, detail::block_prefix("dec", s, b), dec_fsas);
    if (s > 0) {
      cur = e.d2s(e.conv_pw(cur, "up.s" + std::to_string(s - 1)));
      cur = e.conv_pw(e.concat_ch(cur, skips[static_cast<std::size_t>(s - 1)]),
                      "fuse.s" + std::to_string(s - 1));
    }
  }
  auto delta = e.crop(e.conv_pw(cur, "out_conv"), H, W);
  return e.add(delta, input);
}

template <class S>
Tensor<S> forward(const Model<S>& m, const Tensor<S>& input) {
  PlainExec<S> e(m.params);
  return forward_net(e, m.cfg, input);
}

}  // namespace fqfm
