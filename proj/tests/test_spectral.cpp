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

#include <algorithm>
#include <cmath>
#include <complex>
#include <stdexcept>
#include <string>

#include "doctest.h"
#include "fqfm/spectral.hpp"

using namespace fqfm;

namespace {

template <class S>
Tensor<S> rand_t(const Shape& s, std::uint64_t seed, double lo = -1.0, double hi = 1.0) {
  Rng rng(seed);
  return random_uniform<S>(s, rng, lo, hi);
}

}  // namespace

TEST_CASE("pow2 helpers") {
  CHECK(is_pow2(1));
  CHECK(is_pow2(64));
  CHECK(!is_pow2(0));
  CHECK(!is_pow2(12));
  CHECK(next_pow2(1) == 1);
  CHECK(next_pow2(9) == 16);
  CHECK(next_pow2(64) == 64);
}

TEST_CASE("forward transform closed forms") {
  // delta row -> all-ones spectrum
  Tensor<float> delta({1, 4}, {1, 0, 0, 0});
  CTensor<float> sd = fft2(delta);
  for (std::int64_t i = 0; i < 4; ++i) {
    CHECK(sd[i].real() == doctest::Approx(1).epsilon(1e-6));
    CHECK(sd[i].imag() == doctest::Approx(0).epsilon(1e-6));
  }

  // constant row concentrates at DC
  Tensor<float> ones({1, 4}, {1, 1, 1, 1});
  CTensor<float> sc = fft2(ones);
  CHECK(sc[0].real() == doctest::Approx(4).epsilon(1e-6));
  for (std::int64_t i = 1; i < 4; ++i) CHECK(std::abs(sc[i]) < 1e-5f);

  // 2x2 plane, four-term sums by hand
  Tensor<double> p({2, 2}, {1, 2, 3, 4});
  CTensor<double> sp = fft2(p);
  CHECK(sp[0].real() == doctest::Approx(10).epsilon(1e-12));
  CHECK(sp[1].real() == doctest::Approx(-2).epsilon(1e-12));
  CHECK(sp[2].real() == doctest::Approx(-4).epsilon(1e-12));
  CHECK(std::abs(sp[3]) < 1e-12);
  for (std::int64_t i = 0; i < 4; ++i) CHECK(std::abs(sp[i].imag()) < 1e-12);
}

TEST_CASE("DC bin equals the input sum") {
  Tensor<double> x = rand_t<double>({3, 8, 8}, 5);
  CTensor<double> s = fft2(x);
  for (std::int64_t pl = 0; pl < 3; ++pl) {
    double sum = 0;
    for (std::int64_t i = 0; i < 64; ++i) sum += x[pl * 64 + i];
    CHECK(s[pl * 64].real() == doctest::Approx(sum).epsilon(1e-12));
    CHECK(std::abs(s[pl * 64].imag()) < 1e-12);
  }
}

TEST_CASE("inverse round trips within per-precision tolerance") {
  Tensor<float> xf = rand_t<float>({2, 8, 8}, 9);
  CHECK(max_rel_err(ifft2(fft2(xf)), xf) < 1e-5);

  Tensor<double> xd = rand_t<double>({2, 8, 8}, 10);
  CHECK(max_rel_err(ifft2(fft2(xd)), xd) < 1e-10);

  // rectangular plane
  Tensor<double> xr = rand_t<double>({1, 4, 16}, 11);
  CHECK(max_rel_err(ifft2(fft2(xr)), xr) < 1e-10);
}

TEST_CASE("all-ones 4x4 spectrum inverts to a unit delta at the origin") {
  CTensor<float> s({4, 4});
  for (std::int64_t i = 0; i < 16; ++i) s[i] = {1.0f, 0.0f};
  Tensor<float> x = ifft2(s);
  CHECK(x[0] == doctest::Approx(1).epsilon(1e-6));
  for (std::int64_t i = 1; i < 16; ++i) CHECK(std::abs(x[i]) < 1e-6f);
}

TEST_CASE("Parseval energy identity") {
  Tensor<double> x = rand_t<double>({8, 8}, 13);
  CTensor<double> s = fft2(x);
  double ex = 0, es = 0;
  for (std::int64_t i = 0; i < 64; ++i) {
    ex += x[i] * x[i];
    es += std::norm(s[i]);
  }
  CHECK(ex == doctest::Approx(es / 64.0).epsilon(1e-5));
}

TEST_CASE("fft matches the quadratic reference on every pow2 size up to 64") {
  for (std::int64_t h = 1; h <= 64; h *= 2)
    for (std::int64_t w = 1; w <= 64; w *= 2) {
      Tensor<double> x = rand_t<double>({h, w}, 1000 + h * 64 + w);
      CHECK(max_rel_err_c(fft2(x), dft2_oracle(x)) < 1e-10);
    }
}

TEST_CASE("fft matches the quadratic reference on 100 random 8x8 patches") {
  for (int i = 0; i < 100; ++i) {
    Tensor<float> x = rand_t<float>({8, 8}, 2000 + i);
    CHECK(max_rel_err_c(fft2(x), dft2_oracle(x)) < 1e-4);
  }
}

TEST_CASE("reference transform: delta and linearity") {
  Tensor<double> d({3, 5});
  d[0] = 1.0;
  CTensor<double> s = dft2_oracle(d);
  for (std::int64_t i = 0; i < 15; ++i) {
    CHECK(s[i].real() == doctest::Approx(1).epsilon(1e-12));
    CHECK(std::abs(s[i].imag()) < 1e-12);
  }

  Tensor<double> x = rand_t<double>({4, 4}, 17);
  Tensor<double> y = rand_t<double>({4, 4}, 18);
  const double a = 2.0, b = -0.5;
  Tensor<double> mix({4, 4});
  for (std::int64_t i = 0; i < 16; ++i) mix[i] = a * x[i] + b * y[i];
  CTensor<double> sm = dft2_oracle(mix);
  CTensor<double> sx = dft2_oracle(x);
  CTensor<double> sy = dft2_oracle(y);
  for (std::int64_t i = 0; i < 16; ++i)
    CHECK(std::abs(sm[i] - (a * sx[i] + b * sy[i])) < 1e-10);
}

TEST_CASE("correlation reference: hand values and impulse") {
  Tensor<double> a({1, 2}, {1, 2});
  Tensor<double> b({1, 2}, {3, 4});
  Tensor<double> c = circular_cross_correlate_oracle(a, b);
  CHECK(c[0] == doctest::Approx(11).epsilon(1e-12));
  CHECK(c[1] == doctest::Approx(10).epsilon(1e-12));

  Tensor<double> d({4, 4});
  d[0] = 1.0;
  Tensor<double> self = circular_cross_correlate_oracle(d, d);
  CHECK(self[0] == doctest::Approx(1).epsilon(1e-12));
  for (std::int64_t i = 1; i < 16; ++i) CHECK(std::abs(self[i]) < 1e-12);

  CHECK_THROWS_AS(circular_cross_correlate_oracle(a, Tensor<double>({2, 2})),
                  std::invalid_argument);
}

TEST_CASE("correlation theorem: spectral product equals the direct sums") {
  for (int i = 0; i < 8; ++i) {
    Tensor<float> af = rand_t<float>({8, 8}, 3000 + i);
    Tensor<float> bf = rand_t<float>({8, 8}, 3100 + i);
    Tensor<float> via_fft = ifft2(cmul_conj(fft2(af), fft2(bf)));
    CHECK(max_rel_err(via_fft, circular_cross_correlate_oracle(af, bf)) < 1e-5);

    Tensor<double> ad = rand_t<double>({8, 8}, 3200 + i);
    Tensor<double> bd = rand_t<double>({8, 8}, 3300 + i);
    Tensor<double> via_fft_d = ifft2(cmul_conj(fft2(ad), fft2(bd)));
    CHECK(max_rel_err(via_fft_d, circular_cross_correlate_oracle(ad, bd)) < 1e-10);
  }
}

TEST_CASE("real-input spectra are Hermitian symmetric") {
  Tensor<float> x = rand_t<float>({16, 8}, 23);
  CTensor<float> s = fft2(x);
  double smax = 0;
  for (std::int64_t i = 0; i < s.size(); ++i) smax = std::max(smax, std::abs(std::complex<double>(s[i])));
  CHECK(max_hermitian_defect(s) < 1e-5 * smax);
  const std::int64_t h = 16, w = 8;
  for (std::int64_t u = 0; u < h; ++u)
    for (std::int64_t v = 0; v < w; ++v) {
      std::complex<float> mirrored = std::conj(s[((h - u) % h) * w + (w - v) % w]);
      CHECK(std::abs(s[u * w + v] - mirrored) < 1e-5 * smax);
    }
}

TEST_CASE("complex element products") {
  CTensor<double> a({1, 2});
  CTensor<double> b({1, 2});
  a[0] = {1, 2};
  a[1] = {0, 1};
  b[0] = {3, -1};
  b[1] = {2, 2};
  CTensor<double> p = cmul(a, b);
  CHECK(p[0] == std::complex<double>(5, 5));
  CHECK(p[1] == std::complex<double>(-2, 2));
  CTensor<double> q = cmul_conj(a, b);
  CHECK(q[0] == std::complex<double>(1, 7));   // (1+2i)(3+i)
  CHECK(q[1] == std::complex<double>(2, 2));   // i(2-2i)
}

TEST_CASE("rejections: non-pow2 forward, non-Hermitian inverse") {
  CHECK_THROWS_AS(fft2(Tensor<float>({3, 4})), std::invalid_argument);
  CHECK_THROWS_AS(fft2(Tensor<float>({4, 6})), std::invalid_argument);

  CTensor<float> bad({4, 4});
  Rng rng(29);
  for (std::int64_t i = 0; i < 16; ++i)
    bad[i] = {static_cast<float>(rng.uniform(-1, 1)), static_cast<float>(rng.uniform(-1, 1))};
  try {
    (void)ifft2(bad);
    FAIL("expected rejection");
  } catch (const std::invalid_argument& e) {
    CHECK(std::string(e.what()).find("Hermitian") != std::string::npos);
  }
}

TEST_CASE("spectra transform in blocks over leading axes") {
  // a rank-4 stack transforms each trailing plane independently
  Tensor<double> x = rand_t<double>({2, 3, 4, 4}, 31);
  CTensor<double> s = fft2(x);
  for (std::int64_t p = 0; p < 6; ++p) {
    Tensor<double> plane({4, 4});
    std::copy_n(x.data() + p * 16, 16, plane.data());
    CTensor<double> sp = fft2(plane);
    for (std::int64_t i = 0; i < 16; ++i) CHECK(std::abs(s[p * 16 + i] - sp[i]) < 1e-12);
  }
}
