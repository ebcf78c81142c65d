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

#include "fqfm/params.hpp"
#include "fqfm/spectral.hpp"

namespace fqfm {

/// Direct evaluation executor. Model blocks are written once against this
/// interface; the recording executor in autodiff.hpp implements the same
/// surface over tape handles, which keeps the inference and training forward
/// passes bit-identical by construction.
template <class S>
class PlainExec {
 public:
  using Scalar = S;
  using V = Tensor<S>;
  using CV = CTensor<S>;

  explicit PlainExec(const ParameterStore<S>& ps) : ps_(&ps) {}

  Shape shape_of(const V& x) const { return x.shape(); }

  V input(Tensor<S> x) { return x; }

  V conv_pw(const V& x, const std::string& prefix) {
    return conv_pointwise(x, ps_->at(prefix + ".w"), ps_->at(prefix + ".b"));
  }
  V conv_dw(const V& x, const std::string& prefix) {
    return conv_depthwise3x3(x, ps_->at(prefix + ".w"), ps_->at(prefix + ".b"));
  }
  V norm(const V& x, const std::string& prefix) {
    return layer_norm(x, ps_->at(prefix + ".scale"), ps_->at(prefix + ".offset"));
  }
  V geglu(const V& x) { return fqfm::geglu(x); }
  V unfold(const V& x, std::int64_t patch) { return unfold_patches(x, patch); }
  V fold(const V& p, const Shape& target) { return fold_patches(p, target); }
  CV fft2(const V& x) { return fqfm::fft2(x); }
  V ifft2(const CV& s) { return fqfm::ifft2(s); }
  CV cmul_conj(const CV& a, const CV& b) { return fqfm::cmul_conj(a, b); }

  // s ⊙ w with a real weight tensor [C, ph, pw] broadcast over the leading
  // batch/patch axes of s [B, NP, C, ph, pw].
  CV spec_scale(const CV& s, const std::string& name) {
    const Tensor<S>& w = ps_->at(name);
    FQFM_REQUIRE(s.rank() == 5 && w.rank() == 3 && s.extent(2) == w.extent(0) &&
                     s.extent(3) == w.extent(1) && s.extent(4) == w.extent(2),
                 "spec_scale: weight ", shape_str(w.shape()), " does not broadcast over ",
                 shape_str(s.shape()));
    CV out(s.shape());
    const std::int64_t reps = s.extent(0) * s.extent(1), n = w.size();
    for (std::int64_t r = 0; r < reps; ++r)
      for (std::int64_t i = 0; i < n; ++i) out[r * n + i] = s[r * n + i] * w[i];
    instrument::add_flops(2 * s.size());
    return out;
  }

  V mul(const V& a, const V& b) { return fqfm::mul(a, b); }
  V add(const V& a, const V& b) { return fqfm::add(a, b); }
  V sub(const V& a, const V& b) { return fqfm::sub(a, b); }
  V scale_by(const V& a, S c) { return fqfm::scale(a, c); }
  V add_scaled(const V& a, const V& b, S c) { return fqfm::add_scaled(a, b, c); }
  V softmax_op(const V& x, int axis) { return fqfm::softmax(x, axis); }
  V slice_ch(const V& x, std::int64_t c0, std::int64_t c1) { return slice_channels(x, c0, c1); }
  V concat_ch(const V& a, const V& b) { return concat_channels(a, b); }
  V s2d(const V& x) { return space_to_depth(x); }
  V d2s(const V& x) { return depth_to_space(x); }
  V pad_mirror(const V& x, std::int64_t ph, std::int64_t pw) { return mirror_pad_hw(x, ph, pw); }
  V crop(const V& x, std::int64_t h, std::int64_t w) { return crop_hw(x, h, w); }
  V zero_pad(const V& x, std::int64_t h2, std::int64_t w2) { return zero_pad_hw(x, h2, w2); }

  V l1_mean(const V& a, const V& b) {
    Tensor<S> s({1});
    s[0] = static_cast<S>(fqfm::l1_mean(a, b));
    return s;
  }
  V spec_abs_mean(const CV& x) {
    Tensor<S> s({1});
    s[0] = static_cast<S>(spec_abs_mean_value(x));
    return s;
  }
  V sum_all(const V& x) {
    Tensor<S> s({1});
    s[0] = static_cast<S>(sum_all_value(x));
    return s;
  }

  // Optional intermediate capture, keyed by caller-supplied labels.
  void note(const std::string& key, const V& v) {
    if (trace) (*trace)[key] = v;
  }

  std::map<std::string, Tensor<S>>* trace = nullptr;

 private:
  const ParameterStore<S>* ps_;
};

}  // namespace fqfm
