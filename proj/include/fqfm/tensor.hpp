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

#include <complex>
#include <cstdint>
#include <initializer_list>
#include <numeric>
#include <vector>

#include "fqfm/common.hpp"

namespace fqfm {

using Shape = std::vector<std::int64_t>;

inline std::int64_t numel(const Shape& s) {
  std::int64_t n = 1;
  for (std::int64_t e : s) n *= e;
  return n;
}

inline std::string shape_str(const Shape& s) {
  std::string out = "[";
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (i) out += ",";
    out += std::to_string(s[i]);
  }
  return out + "]";
}

inline void check_shape(const Shape& s) {
  FQFM_REQUIRE(!s.empty() && s.size() <= 5, "tensor rank must be 1..5, got shape ", shape_str(s));
  for (std::int64_t e : s) FQFM_REQUIRE(e >= 1, "all extents must be >= 1, got shape ", shape_str(s));
}

namespace detail {

// std::vector wrapper that reports its payload to the live-byte tracker.
template <class T>
class TrackedBuf {
 public:
  TrackedBuf() = default;
  explicit TrackedBuf(std::size_t n) : v_(n) { instrument::track_alloc(bytes()); }
  TrackedBuf(std::size_t n, const T& fill) : v_(n, fill) { instrument::track_alloc(bytes()); }
  explicit TrackedBuf(std::vector<T> v) : v_(std::move(v)) { instrument::track_alloc(bytes()); }
  TrackedBuf(const TrackedBuf& o) : v_(o.v_) { instrument::track_alloc(bytes()); }
  TrackedBuf(TrackedBuf&& o) noexcept : v_(std::move(o.v_)) { o.v_.clear(); o.v_.shrink_to_fit(); }
  TrackedBuf& operator=(const TrackedBuf& o) {
    if (this != &o) {
      instrument::track_free(bytes());
      v_ = o.v_;
      instrument::track_alloc(bytes());
    }
    return *this;
  }
  TrackedBuf& operator=(TrackedBuf&& o) noexcept {
    if (this != &o) {
      instrument::track_free(bytes());
      v_ = std::move(o.v_);
      o.v_.clear();
      o.v_.shrink_to_fit();
    }
    return *this;
  }
  ~TrackedBuf() { instrument::track_free(bytes()); }

  std::vector<T>& vec() { return v_; }
  const std::vector<T>& vec() const { return v_; }

 private:
  std::int64_t bytes() const { return static_cast<std::int64_t>(v_.size() * sizeof(T)); }
  std::vector<T> v_;
};

}  // namespace detail

/// Dense real tensor, contiguous row-major with the last axis fastest.
/// Model features use the [batch, channels, height, width] convention; the
/// row-major little-endian layout is the substrate of the checkpoint format.
template <class S>
class Tensor {
 public:
  using value_type = S;

  Tensor() = default;

  explicit Tensor(Shape shape) : shape_(std::move(shape)) {
    check_shape(shape_);
    buf_ = detail::TrackedBuf<S>(static_cast<std::size_t>(numel(shape_)), S(0));
  }

  Tensor(Shape shape, std::vector<S> data) : shape_(std::move(shape)) {
    check_shape(shape_);
    FQFM_REQUIRE(static_cast<std::int64_t>(data.size()) == numel(shape_),
                 "data length ", data.size(), " does not match shape ", shape_str(shape_));
    buf_ = detail::TrackedBuf<S>(std::move(data));
  }

  static Tensor full(Shape shape, S value) {
    Tensor t(std::move(shape));
    for (S& x : t.buf_.vec()) x = value;
    return t;
  }

  bool empty() const { return shape_.empty(); }
  const Shape& shape() const { return shape_; }
  int rank() const { return static_cast<int>(shape_.size()); }
  std::int64_t extent(int axis) const { return shape_[static_cast<std::size_t>(axis)]; }
  std::int64_t size() const { return static_cast<std::int64_t>(buf_.vec().size()); }

  S* data() { return buf_.vec().data(); }
  const S* data() const { return buf_.vec().data(); }

  S& operator[](std::int64_t i) { return buf_.vec()[static_cast<std::size_t>(i)]; }
  const S& operator[](std::int64_t i) const { return buf_.vec()[static_cast<std::size_t>(i)]; }

  // 4-D accessor for [b,c,h,w] tensors.
  S& at4(std::int64_t b, std::int64_t c, std::int64_t h, std::int64_t w) {
    return (*this)[((b * shape_[1] + c) * shape_[2] + h) * shape_[3] + w];
  }
  const S& at4(std::int64_t b, std::int64_t c, std::int64_t h, std::int64_t w) const {
    return (*this)[((b * shape_[1] + c) * shape_[2] + h) * shape_[3] + w];
  }

  bool same_shape(const Tensor& o) const { return shape_ == o.shape_; }

 private:
  Shape shape_;
  detail::TrackedBuf<S> buf_;
};

/// Dense complex tensor; houses 2-D spectra of the trailing two axes.
template <class S>
class CTensor {
 public:
  using value_type = std::complex<S>;

  CTensor() = default;

  explicit CTensor(Shape shape) : shape_(std::move(shape)) {
    check_shape(shape_);
    buf_ = detail::TrackedBuf<std::complex<S>>(static_cast<std::size_t>(numel(shape_)),
                                               std::complex<S>(0, 0));
  }

  bool empty() const { return shape_.empty(); }
  const Shape& shape() const { return shape_; }
  int rank() const { return static_cast<int>(shape_.size()); }
  std::int64_t extent(int axis) const { return shape_[static_cast<std::size_t>(axis)]; }
  std::int64_t size() const { return static_cast<std::int64_t>(buf_.vec().size()); }

  std::complex<S>* data() { return buf_.vec().data(); }
  const std::complex<S>* data() const { return buf_.vec().data(); }

  std::complex<S>& operator[](std::int64_t i) { return buf_.vec()[static_cast<std::size_t>(i)]; }
  const std::complex<S>& operator[](std::int64_t i) const {
    return buf_.vec()[static_cast<std::size_t>(i)];
  }

 private:
  Shape shape_;
  detail::TrackedBuf<std::complex<S>> buf_;
};

using Tensorf = Tensor<float>;
using Tensord = Tensor<double>;

template <class S>
Tensor<S> random_uniform(const Shape& shape, Rng& rng, double lo = -1.0, double hi = 1.0) {
  Tensor<S> t(shape);
  for (std::int64_t i = 0; i < t.size(); ++i) t[i] = static_cast<S>(rng.uniform(lo, hi));
  return t;
}

template <class S>
bool bit_equal(const Tensor<S>& a, const Tensor<S>& b) {
  if (a.shape() != b.shape()) return false;
  for (std::int64_t i = 0; i < a.size(); ++i)
    if (a[i] != b[i]) return false;
  return true;
}

template <class S>
double max_abs(const Tensor<S>& t) {
  double m = 0;
  for (std::int64_t i = 0; i < t.size(); ++i) m = std::max(m, std::abs(static_cast<double>(t[i])));
  return m;
}

/// max |a-b| normalized by the larger magnitude present in either tensor.
template <class S>
double max_rel_err(const Tensor<S>& a, const Tensor<S>& b, double floor = 1e-12) {
  FQFM_REQUIRE(a.shape() == b.shape(), "max_rel_err: shape mismatch ", shape_str(a.shape()), " vs ",
               shape_str(b.shape()));
  double denom = std::max({max_abs(a), max_abs(b), floor});
  double m = 0;
  for (std::int64_t i = 0; i < a.size(); ++i)
    m = std::max(m, std::abs(static_cast<double>(a[i]) - static_cast<double>(b[i])));
  return m / denom;
}

template <class S>
bool has_nan(const Tensor<S>& t) {
  for (std::int64_t i = 0; i < t.size(); ++i)
    if (std::isnan(static_cast<double>(t[i]))) return true;
  return false;
}

template <class To, class From>
Tensor<To> cast(const Tensor<From>& t) {
  Tensor<To> out(t.shape());
  for (std::int64_t i = 0; i < t.size(); ++i) out[i] = static_cast<To>(t[i]);
  return out;
}

}  // namespace fqfm
