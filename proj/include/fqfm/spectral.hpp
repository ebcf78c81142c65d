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

#include <numbers>

#include "fqfm/tensor.hpp"

namespace fqfm {

inline bool is_pow2(std::int64_t n) { return n >= 1 && (n & (n - 1)) == 0; }

inline std::int64_t next_pow2(std::int64_t n) {
  std::int64_t p = 1;
  while (p < n) p <<= 1;
  return p;
}

namespace detail {

// In-place radix-2 decimation-in-time along a strided line of length n (power
// of two). Unnormalized; `sign` -1 for forward, +1 for inverse.
template <class S>
void fft_line(std::complex<S>* data, std::int64_t n, std::int64_t stride, int sign) {
  if (n == 1) return;
  for (std::int64_t i = 1, j = 0; i < n; ++i) {
    std::int64_t bit = n >> 1;
    for (; j & bit; bit >>= 1) j ^= bit;
    j |= bit;
    if (i < j) std::swap(data[i * stride], data[j * stride]);
  }
  for (std::int64_t len = 2; len <= n; len <<= 1) {
    const double ang = sign * 2.0 * std::numbers::pi / static_cast<double>(len);
    const std::complex<double> wl(std::cos(ang), std::sin(ang));
    for (std::int64_t i = 0; i < n; i += len) {
      std::complex<double> w(1, 0);
      for (std::int64_t k = 0; k < len / 2; ++k) {
        std::complex<double> u(data[(i + k) * stride]);
        std::complex<double> v = std::complex<double>(data[(i + k + len / 2) * stride]) * w;
        data[(i + k) * stride] = std::complex<S>(u + v);
        data[(i + k + len / 2) * stride] = std::complex<S>(u - v);
        w *= wl;
      }
    }
  }
}

template <class S>
void fft2_plane(std::complex<S>* p, std::int64_t h, std::int64_t w, int sign) {
  for (std::int64_t r = 0; r < h; ++r) fft_line(p + r * w, w, 1, sign);
  for (std::int64_t c = 0; c < w; ++c) fft_line(p + c, h, w, sign);
  // ~10 flops per butterfly, h*w*log2(h*w)/2 butterflies per pass pair
  const double n = static_cast<double>(h * w);
  instrument::add_flops(static_cast<std::int64_t>(5.0 * n * std::log2(n > 1 ? n : 2)));
}

}  // namespace detail

/// Unnormalized forward 2-D DFT of the trailing two axes (power-of-two extents).
template <class S>
CTensor<S> fft2(const Tensor<S>& x) {
  FQFM_REQUIRE(x.rank() >= 2, "fft2: expected rank >= 2, got ", shape_str(x.shape()));
  const std::int64_t h = x.extent(x.rank() - 2), w = x.extent(x.rank() - 1);
  FQFM_REQUIRE(is_pow2(h) && is_pow2(w), "fft2: trailing extents must be powers of two, got ",
               shape_str(x.shape()));
  CTensor<S> s(x.shape());
  for (std::int64_t i = 0; i < x.size(); ++i) s[i] = std::complex<S>(x[i], 0);
  const std::int64_t planes = x.size() / (h * w);
  for (std::int64_t p = 0; p < planes; ++p) detail::fft2_plane(s.data() + p * h * w, h, w, -1);
  return s;
}

/// Forward 2-D DFT of an already-complex tensor (used by adjoints).
template <class S>
CTensor<S> fft2_c(const CTensor<S>& x) {
  const std::int64_t h = x.extent(x.rank() - 2), w = x.extent(x.rank() - 1);
  FQFM_REQUIRE(is_pow2(h) && is_pow2(w), "fft2_c: trailing extents must be powers of two, got ",
               shape_str(x.shape()));
  CTensor<S> s(x.shape());
  for (std::int64_t i = 0; i < x.size(); ++i) s[i] = x[i];
  const std::int64_t planes = x.size() / (h * w);
  for (std::int64_t p = 0; p < planes; ++p) detail::fft2_plane(s.data() + p * h * w, h, w, -1);
  return s;
}

/// Inverse 2-D DFT with 1/(h*w) normalization, complex-to-complex.
template <class S>
CTensor<S> ifft2_c(const CTensor<S>& s) {
  const std::int64_t h = s.extent(s.rank() - 2), w = s.extent(s.rank() - 1);
  FQFM_REQUIRE(is_pow2(h) && is_pow2(w), "ifft2_c: trailing extents must be powers of two, got ",
               shape_str(s.shape()));
  CTensor<S> x(s.shape());
  for (std::int64_t i = 0; i < s.size(); ++i) x[i] = s[i];
  const std::int64_t planes = s.size() / (h * w);
  const S inv = static_cast<S>(1.0 / static_cast<double>(h * w));
  for (std::int64_t p = 0; p < planes; ++p) detail::fft2_plane(x.data() + p * h * w, h, w, +1);
  for (std::int64_t i = 0; i < x.size(); ++i) x[i] *= inv;
  return x;
}

/// Inverse 2-D DFT of a Hermitian-symmetric spectrum back to a real tensor.
/// Rejects spectra whose imaginary residue exceeds 1e-3 of the real magnitude.
template <class S>
Tensor<S> ifft2(const CTensor<S>& s) {
  CTensor<S> z = ifft2_c(s);
  double max_im = 0, max_re = 0;
  for (std::int64_t i = 0; i < z.size(); ++i) {
    max_im = std::max(max_im, std::abs(static_cast<double>(z[i].imag())));
    max_re = std::max(max_re, std::abs(static_cast<double>(z[i].real())));
  }
  FQFM_REQUIRE(max_im <= 1e-3 * std::max(max_re, 1e-30),
               "ifft2: spectrum is not Hermitian (imaginary residue ", max_im, " vs real ", max_re,
               ")");
  Tensor<S> out(s.shape());
  for (std::int64_t i = 0; i < z.size(); ++i) out[i] = z[i].real();
  return out;
}

/// O(N^2) double-sum DFT of the trailing two axes; any extents. The reference
/// that defines correctness for fft2.
template <class S>
CTensor<S> dft2_oracle(const Tensor<S>& x) {
  FQFM_REQUIRE(x.rank() >= 2, "dft2_oracle: expected rank >= 2, got ", shape_str(x.shape()));
  const std::int64_t h = x.extent(x.rank() - 2), w = x.extent(x.rank() - 1);
  const std::int64_t planes = x.size() / (h * w);
  std::vector<std::complex<double>> wh(static_cast<std::size_t>(h)),
      ww(static_cast<std::size_t>(w));
  for (std::int64_t u = 0; u < h; ++u) {
    const double a = -2.0 * std::numbers::pi * static_cast<double>(u) / static_cast<double>(h);
    wh[u] = {std::cos(a), std::sin(a)};
  }
  for (std::int64_t v = 0; v < w; ++v) {
    const double a = -2.0 * std::numbers::pi * static_cast<double>(v) / static_cast<double>(w);
    ww[v] = {std::cos(a), std::sin(a)};
  }
  CTensor<S> s(x.shape());
  for (std::int64_t p = 0; p < planes; ++p) {
    const S* in = x.data() + p * h * w;
    std::complex<S>* out = s.data() + p * h * w;
    for (std::int64_t u = 0; u < h; ++u)
      for (std::int64_t v = 0; v < w; ++v) {
        std::complex<double> acc(0, 0);
        for (std::int64_t m = 0; m < h; ++m)
          for (std::int64_t n = 0; n < w; ++n)
            acc += static_cast<double>(in[m * w + n]) * wh[(u * m) % h] * ww[(v * n) % w];
        out[u * w + v] = std::complex<S>(acc);
      }
  }
  return s;
}

/// Direct-sum circular cross-correlation of the trailing two axes:
/// c[k,l] = sum_{m,n} a[m,n] * b[(m+k) mod h, (n+l) mod w].
template <class S>
Tensor<S> circular_cross_correlate_oracle(const Tensor<S>& a, const Tensor<S>& b) {
  FQFM_REQUIRE(a.shape() == b.shape(), "circular_cross_correlate_oracle: shape mismatch ",
               shape_str(a.shape()), " vs ", shape_str(b.shape()));
  FQFM_REQUIRE(a.rank() >= 2, "circular_cross_correlate_oracle: expected rank >= 2");
  const std::int64_t h = a.extent(a.rank() - 2), w = a.extent(a.rank() - 1);
  const std::int64_t planes = a.size() / (h * w);
  Tensor<S> c(a.shape());
  for (std::int64_t p = 0; p < planes; ++p) {
    const S* pa = a.data() + p * h * w;
    const S* pb = b.data() + p * h * w;
    S* pc = c.data() + p * h * w;
    for (std::int64_t k = 0; k < h; ++k)
      for (std::int64_t l = 0; l < w; ++l) {
        double acc = 0;
        for (std::int64_t m = 0; m < h; ++m)
          for (std::int64_t n = 0; n < w; ++n)
            acc += static_cast<double>(pa[((m + k) % h) * w + (n + l) % w]) *
                   static_cast<double>(pb[m * w + n]);
        pc[k * w + l] = static_cast<S>(acc);
      }
  }
  return c;
}

/// Element-wise a ⊙ conj(b).
template <class S>
CTensor<S> cmul_conj(const CTensor<S>& a, const CTensor<S>& b) {
  FQFM_REQUIRE(a.shape() == b.shape(), "cmul_conj: shape mismatch ", shape_str(a.shape()), " vs ",
               shape_str(b.shape()));
  CTensor<S> out(a.shape());
  for (std::int64_t i = 0; i < a.size(); ++i) out[i] = a[i] * std::conj(b[i]);
  instrument::add_flops(6 * a.size());
  return out;
}

/// Element-wise complex product.
template <class S>
CTensor<S> cmul(const CTensor<S>& a, const CTensor<S>& b) {
  FQFM_REQUIRE(a.shape() == b.shape(), "cmul: shape mismatch ", shape_str(a.shape()), " vs ",
               shape_str(b.shape()));
  CTensor<S> out(a.shape());
  for (std::int64_t i = 0; i < a.size(); ++i) out[i] = a[i] * b[i];
  instrument::add_flops(6 * a.size());
  return out;
}

/// Mean complex magnitude over all spectrum entries.
template <class S>
double spec_abs_mean_value(const CTensor<S>& s) {
  double acc = 0;
  for (std::int64_t i = 0; i < s.size(); ++i) acc += std::abs(std::complex<double>(s[i]));
  instrument::add_flops(4 * s.size());
  return acc / static_cast<double>(s.size());
}

template <class S>
double max_hermitian_defect(const CTensor<S>& s) {
  const std::int64_t h = s.extent(s.rank() - 2), w = s.extent(s.rank() - 1);
  const std::int64_t planes = s.size() / (h * w);
  double m = 0;
  for (std::int64_t p = 0; p < planes; ++p) {
    const std::complex<S>* ps = s.data() + p * h * w;
    for (std::int64_t u = 0; u < h; ++u)
      for (std::int64_t v = 0; v < w; ++v) {
        const std::complex<double> a(ps[u * w + v]);
        const std::complex<double> b(ps[((h - u) % h) * w + (w - v) % w]);
        m = std::max(m, std::abs(a - std::conj(b)));
      }
  }
  return m;
}

template <class S>
double max_rel_err_c(const CTensor<S>& a, const CTensor<S>& b, double floor = 1e-12) {
  FQFM_REQUIRE(a.shape() == b.shape(), "max_rel_err_c: shape mismatch");
  double denom = floor, m = 0;
  for (std::int64_t i = 0; i < a.size(); ++i) {
    denom = std::max({denom, std::abs(std::complex<double>(a[i])),
                      std::abs(std::complex<double>(b[i]))});
  }
  for (std::int64_t i = 0; i < a.size(); ++i)
    m = std::max(m, std::abs(std::complex<double>(a[i]) - std::complex<double>(b[i])));
  return m / denom;
}

}  // namespace fqfm
