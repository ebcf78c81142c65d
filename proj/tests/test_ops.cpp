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

#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

#include "doctest.h"
#include "fqfm/ops.hpp"

using namespace fqfm;

namespace {

template <class S>
Tensor<S> rand_t(const Shape& s, std::uint64_t seed, double lo = -1.0, double hi = 1.0) {
  Rng rng(seed);
  return random_uniform<S>(s, rng, lo, hi);
}

}  // namespace

TEST_CASE("mirror_index reflects without repeating the border") {
  CHECK(mirror_index(0, 4) == 0);
  CHECK(mirror_index(-1, 4) == 1);
  CHECK(mirror_index(-2, 4) == 2);
  CHECK(mirror_index(4, 4) == 2);
  CHECK(mirror_index(5, 4) == 1);
  CHECK(mirror_index(6, 4) == 0);
  CHECK(mirror_index(7, 4) == 1);  // period 2n-2 = 6
  CHECK(mirror_index(0, 1) == 0);
  CHECK(mirror_index(9, 1) == 0);
}

TEST_CASE("conv_pointwise identity, annihilator, and hand product") {
  Tensor<float> ones = Tensor<float>::full({1, 1, 2, 2}, 1.0f);
  Tensor<float> wid({1, 1, 1, 1}, {1.0f});
  Tensor<float> b0({1});
  CHECK(bit_equal(conv_pointwise(ones, wid, b0), ones));

  Tensor<float> x = rand_t<float>({1, 1, 3, 3}, 7);
  Tensor<float> wz({1, 1, 1, 1});
  CHECK(max_abs(conv_pointwise(x, wz, b0)) == 0.0f);

  Tensor<float> v({1, 2, 1, 1}, {1, 2});
  Tensor<float> w({2, 2, 1, 1}, {1, 1, 1, -1});
  Tensor<float> b2({2});
  Tensor<float> y = conv_pointwise(v, w, b2);
  CHECK(y.at4(0, 0, 0, 0) == doctest::Approx(3));
  CHECK(y.at4(0, 1, 0, 0) == doctest::Approx(-1));
}

TEST_CASE("conv_pointwise rejects channel mismatch naming both shapes") {
  Tensor<float> x({1, 2, 2, 2});
  Tensor<float> w({3, 4, 1, 1});
  Tensor<float> b({3});
  try {
    conv_pointwise(x, w, b);
    FAIL("expected rejection");
  } catch (const std::invalid_argument& e) {
    const std::string msg = e.what();
    CHECK(msg.find("[3,4,1,1]") != std::string::npos);
    CHECK(msg.find("[1,2,2,2]") != std::string::npos);
  }
}

TEST_CASE("conv_depthwise3x3 delta kernel, constants, and box center") {
  Tensor<float> x = rand_t<float>({1, 2, 4, 5}, 11);
  Tensor<float> delta({2, 1, 3, 3});
  delta[4] = 1.0f;
  delta[13] = 1.0f;
  Tensor<float> b({2});
  CHECK(max_rel_err(conv_depthwise3x3(x, delta, b), x) < 1e-6);

  Tensor<float> c = Tensor<float>::full({1, 1, 5, 5}, 3.25f);
  Tensor<float> ksum1 = Tensor<float>::full({1, 1, 3, 3}, 1.0f / 9.0f);
  Tensor<float> b1({1});
  Tensor<float> yc = conv_depthwise3x3(c, ksum1, b1);
  CHECK(max_rel_err(yc, c) < 1e-6);

  Tensor<float> seq({1, 1, 3, 3}, {1, 2, 3, 4, 5, 6, 7, 8, 9});
  Tensor<float> box = Tensor<float>::full({1, 1, 3, 3}, 1.0f / 9.0f);
  Tensor<float> yb = conv_depthwise3x3(seq, box, b1);
  CHECK(yb.at4(0, 0, 1, 1) == doctest::Approx(5).epsilon(1e-6));

  Tensor<float> wbad({3, 1, 3, 3});
  CHECK_THROWS_AS(conv_depthwise3x3(x, wbad, Tensor<float>({3})), std::invalid_argument);
}

TEST_CASE("layer_norm two-point, constant, and moment checks") {
  Tensor<float> x({1, 2, 1, 1}, {1, 3});
  Tensor<float> sc = Tensor<float>::full({2}, 1.0f);
  Tensor<float> off({2});
  Tensor<float> y = layer_norm(x, sc, off);
  CHECK(y[0] == doctest::Approx(-1).epsilon(1e-3));
  CHECK(y[1] == doctest::Approx(1).epsilon(1e-3));

  Tensor<float> c = Tensor<float>::full({1, 4, 1, 1}, 0.7f);
  Tensor<float> sc4 = Tensor<float>::full({4}, 1.0f);
  Tensor<float> off4({4});
  CHECK(max_abs(layer_norm(c, sc4, off4)) < 1e-3f);

  Tensor<double> r = rand_t<double>({1, 8, 1, 1}, 3);
  Tensor<double> sc8 = Tensor<double>::full({8}, 1.0);
  Tensor<double> off8({8});
  Tensor<double> yr = layer_norm(r, sc8, off8);
  double mean = 0, var = 0;
  for (std::int64_t i = 0; i < 8; ++i) mean += yr[i];
  mean /= 8;
  for (std::int64_t i = 0; i < 8; ++i) var += (yr[i] - mean) * (yr[i] - mean);
  var /= 8;
  CHECK(std::abs(mean) < 1e-6);
  CHECK(std::abs(var - 1) < 1e-3);

  CHECK_THROWS_AS(layer_norm(Tensor<float>({1, 1, 1}), sc, off), std::invalid_argument);
}

TEST_CASE("layer_norm affine invariance") {
  Tensor<double> x = rand_t<double>({2, 6, 3, 3}, 19);
  Tensor<double> sc = Tensor<double>::full({6}, 1.0);
  Tensor<double> off({6});
  Tensor<double> ax(x.shape());
  for (std::int64_t i = 0; i < x.size(); ++i) ax[i] = 2.5 * x[i] + 0.3;
  CHECK(max_rel_err(layer_norm(x, sc, off), layer_norm(ax, sc, off)) < 1e-5);
}

TEST_CASE("softmax symmetry, stability, closed form, and properties") {
  Tensor<float> s({1, 2, 1, 1}, {0, 0});
  Tensor<float> y = softmax(s, 1);
  CHECK(y[0] == doctest::Approx(0.5));
  CHECK(y[1] == doctest::Approx(0.5));

  Tensor<float> big({1, 2, 1, 1}, {3.0f, 1003.0f});
  Tensor<float> yb = softmax(big, 1);
  CHECK(yb[0] == doctest::Approx(0).epsilon(1e-6));
  CHECK(yb[1] == doctest::Approx(1).epsilon(1e-6));

  Tensor<float> ln3({1, 2, 1, 1}, {0.0f, std::log(3.0f)});
  Tensor<float> y3 = softmax(ln3, 1);
  CHECK(y3[0] == doctest::Approx(0.25).epsilon(1e-6));
  CHECK(y3[1] == doctest::Approx(0.75).epsilon(1e-6));

  // row sums and shift invariance on a random batch, along two axes
  for (int axis : {1, 3}) {
    Tensor<double> x = rand_t<double>({2, 3, 2, 4}, 23 + axis);
    Tensor<double> p = softmax(x, axis);
    Tensor<double> shifted(x.shape());
    for (std::int64_t i = 0; i < x.size(); ++i) shifted[i] = x[i] + 7.5;
    CHECK(max_rel_err(p, softmax(shifted, axis)) < 1e-6);
    const std::int64_t n = x.extent(axis);
    const std::int64_t rows = x.size() / n;
    // walk each line along `axis` via strides
    std::int64_t inner = 1;
    for (std::int64_t d = axis + 1; d < x.rank(); ++d) inner *= x.extent(d);
    for (std::int64_t r = 0; r < rows; ++r) {
      const std::int64_t outer = r / inner, rem = r % inner;
      double sum = 0;
      for (std::int64_t k = 0; k < n; ++k) sum += p[(outer * n + k) * inner + rem];
      CHECK(sum == doctest::Approx(1).epsilon(1e-6));
    }
  }

  Tensor<float> nan_in({1, 2, 1, 1}, {0.0f, std::numeric_limits<float>::quiet_NaN()});
  CHECK_THROWS_AS(softmax(nan_in, 1), std::invalid_argument);
}

TEST_CASE("unfold produces the documented patch grid") {
  Tensor<float> x16 = rand_t<float>({1, 1, 16, 16}, 31);
  Tensor<float> p16 = unfold_patches(x16, 8);
  CHECK(p16.shape() == Shape{1, 4, 1, 8, 8});

  Tensor<float> x8 = rand_t<float>({1, 1, 8, 8}, 32);
  Tensor<float> p8 = unfold_patches(x8, 8);
  CHECK(p8.shape() == Shape{1, 1, 1, 8, 8});
  Tensor<float> flat({1, 1, 8, 8}, std::vector<float>(p8.data(), p8.data() + 64));
  CHECK(bit_equal(flat, x8));

  Tensor<float> x9 = rand_t<float>({1, 1, 9, 9}, 33);
  Tensor<float> p9 = unfold_patches(x9, 8);
  CHECK(p9.shape() == Shape{1, 4, 1, 8, 8});
  CHECK(bit_equal(fold_patches(p9, x9.shape()), x9));

  CHECK_THROWS_AS(unfold_patches(Tensor<float>({1, 1, 4, 4}), 0), std::invalid_argument);
}

TEST_CASE("unfold patch order is row-major over the patch grid") {
  // plane whose value equals its patch id under a 2x2 patch grid
  Tensor<float> x({1, 1, 4, 4});
  for (std::int64_t i = 0; i < 4; ++i)
    for (std::int64_t j = 0; j < 4; ++j) x[i * 4 + j] = float((i / 2) * 2 + (j / 2));
  Tensor<float> p = unfold_patches(x, 2);
  for (std::int64_t np = 0; np < 4; ++np)
    for (std::int64_t k = 0; k < 4; ++k) CHECK(p[np * 4 + k] == float(np));
}

TEST_CASE("fold is the exact inverse of unfold") {
  Tensor<double> x = rand_t<double>({2, 3, 32, 32}, 41);
  CHECK(bit_equal(fold_patches(unfold_patches(x, 8), x.shape()), x));

  Tensor<double> odd = rand_t<double>({1, 2, 9, 13}, 42);
  CHECK(bit_equal(fold_patches(unfold_patches(odd, 8), odd.shape()), odd));

  Tensor<double> single = rand_t<double>({1, 1, 8, 8}, 43);
  CHECK(bit_equal(fold_patches(unfold_patches(single, 8), single.shape()), single));

  // inconsistent patch count vs target
  Tensor<double> p = unfold_patches(x, 8);
  CHECK_THROWS_AS(fold_patches(p, Shape{2, 3, 64, 64}), std::invalid_argument);
}

TEST_CASE("gelu and geglu closed-form values") {
  CHECK(gelu_exact(0.0) == 0.0);
  CHECK(gelu_exact(1.0) == doctest::Approx(0.841345).epsilon(1e-6));

  Tensor<float> zero_gate({1, 2, 1, 1}, {5.0f, 0.0f});
  CHECK(max_abs(geglu(zero_gate)) == 0.0f);

  Tensor<float> unit({1, 2, 1, 1}, {1.0f, 1.0f});
  CHECK(geglu(unit)[0] == doctest::Approx(0.841345).epsilon(1e-6));

  // for large gate input the GELU factor saturates to the identity, so the
  // output approaches a ⊙ b
  CHECK(gelu_exact(100.0) == doctest::Approx(100.0).epsilon(1e-12));
  Tensor<float> sat({1, 2, 1, 1}, {2.0f, 100.0f});
  CHECK(geglu(sat)[0] == doctest::Approx(200).epsilon(1e-6));

  CHECK_THROWS_AS(geglu(Tensor<float>({1, 3, 1, 1})), std::invalid_argument);
}

TEST_CASE("conv linearity") {
  Tensor<double> x = rand_t<double>({1, 3, 5, 5}, 51);
  Tensor<double> y = rand_t<double>({1, 3, 5, 5}, 52);
  Tensor<double> w = rand_t<double>({4, 3, 1, 1}, 53);
  Tensor<double> b({4});
  const double alpha = 1.7, beta = -0.4;
  Tensor<double> mix(x.shape());
  for (std::int64_t i = 0; i < x.size(); ++i) mix[i] = alpha * x[i] + beta * y[i];
  Tensor<double> lhs = conv_pointwise(mix, w, b);
  Tensor<double> rhs = add_scaled(scale(conv_pointwise(x, w, b), alpha),
                                  conv_pointwise(y, w, b), beta);
  CHECK(max_rel_err(lhs, rhs) < 1e-5);

  Tensor<double> wd = rand_t<double>({3, 1, 3, 3}, 54);
  Tensor<double> bd({3});
  Tensor<double> lhs_d = conv_depthwise3x3(mix, wd, bd);
  Tensor<double> rhs_d = add_scaled(scale(conv_depthwise3x3(x, wd, bd), alpha),
                                    conv_depthwise3x3(y, wd, bd), beta);
  CHECK(max_rel_err(lhs_d, rhs_d) < 1e-5);
}

TEST_CASE("space_to_depth and depth_to_space invert each other") {
  Tensor<float> x = rand_t<float>({2, 3, 6, 8}, 61);
  Tensor<float> d = space_to_depth(x);
  CHECK(d.shape() == Shape{2, 12, 3, 4});
  CHECK(bit_equal(depth_to_space(d), x));
  CHECK_THROWS_AS(space_to_depth(Tensor<float>({1, 1, 3, 4})), std::invalid_argument);
}

TEST_CASE("downsample and upsample shape contracts") {
  Tensor<float> x({1, 2, 16, 16});
  ConvParams<float> down{rand_t<float>({4, 8, 1, 1}, 71), Tensor<float>({4})};
  Tensor<float> y = downsample(x, down);
  CHECK(y.shape() == Shape{1, 4, 8, 8});

  Tensor<float> u({1, 4, 8, 8});
  ConvParams<float> up{rand_t<float>({8, 4, 1, 1}, 72), Tensor<float>({8})};
  Tensor<float> z = upsample(u, up);
  CHECK(z.shape() == Shape{1, 2, 16, 16});

  CHECK_THROWS_AS(downsample(Tensor<float>({1, 2, 7, 8}), down), std::invalid_argument);
}

TEST_CASE("upsample undoes downsample under identity-configured convs") {
  // down: 1x1 conv = identity on the 4C space-to-depth channels;
  // up: 1x1 conv = identity back, so the pairing is a pure permutation round trip
  Tensor<float> x = rand_t<float>({1, 2, 4, 4}, 73);
  Tensor<float> wid({8, 8, 1, 1});
  for (std::int64_t i = 0; i < 8; ++i) wid[i * 8 + i] = 1.0f;
  ConvParams<float> down{wid, Tensor<float>({8})};
  ConvParams<float> up{wid, Tensor<float>({8})};
  Tensor<float> z = upsample(downsample(x, down), up);
  CHECK(bit_equal(z, x));
}

TEST_CASE("channel slice and concat are inverse") {
  Tensor<float> x = rand_t<float>({2, 6, 3, 3}, 81);
  Tensor<float> a = slice_channels(x, 0, 2);
  Tensor<float> b = slice_channels(x, 2, 6);
  CHECK(a.shape() == Shape{2, 2, 3, 3});
  CHECK(bit_equal(concat_channels(a, b), x));
  CHECK_THROWS_AS(slice_channels(x, 4, 2), std::invalid_argument);
}

TEST_CASE("mirror and zero padding with crops") {
  Tensor<float> x = rand_t<float>({1, 1, 3, 3}, 91);
  Tensor<float> m = mirror_pad_hw(x, 2, 3);
  CHECK(m.shape() == Shape{1, 1, 5, 6});
  CHECK(bit_equal(crop_hw(m, 3, 3), x));
  // reflected row 3 maps back to source row 1; columns 3,4 map to 1,0
  CHECK(m.at4(0, 0, 3, 0) == x.at4(0, 0, 1, 0));
  CHECK(m.at4(0, 0, 3, 3) == x.at4(0, 0, 1, 1));
  CHECK(m.at4(0, 0, 3, 4) == x.at4(0, 0, 1, 0));

  Tensor<float> z = zero_pad_hw(x, 4, 4);
  CHECK(z.shape() == Shape{1, 1, 4, 4});
  CHECK(z.at4(0, 0, 3, 3) == 0.0f);
  CHECK(bit_equal(crop_hw(z, 3, 3), x));
}

TEST_CASE("blocks agree across 32-bit and 64-bit within 1e-4") {
  Tensor<double> xd = rand_t<double>({1, 4, 8, 8}, 101, 0.0, 1.0);
  Tensor<float> xf = cast<float>(xd);

  Tensor<double> wd = rand_t<double>({4, 4, 1, 1}, 102);
  Tensor<double> bd = rand_t<double>({4}, 103);
  Tensor<double> yd = conv_pointwise(xd, wd, bd);
  Tensor<float> yf = conv_pointwise(xf, cast<float>(wd), cast<float>(bd));
  CHECK(max_rel_err(cast<double>(yf), yd) < 1e-4);

  Tensor<double> dwd = rand_t<double>({4, 1, 3, 3}, 104);
  Tensor<double> yd2 = conv_depthwise3x3(xd, dwd, bd);
  Tensor<float> yf2 = conv_depthwise3x3(xf, cast<float>(dwd), cast<float>(bd));
  CHECK(max_rel_err(cast<double>(yf2), yd2) < 1e-4);

  Tensor<double> sc = Tensor<double>::full({4}, 1.0), off({4});
  CHECK(max_rel_err(cast<double>(layer_norm(xf, cast<float>(sc), cast<float>(off))),
                    layer_norm(xd, sc, off)) < 1e-4);
  CHECK(max_rel_err(cast<double>(geglu(xf)), geglu(xd)) < 1e-4);
  CHECK(max_rel_err(cast<double>(softmax(xf, 1)), softmax(xd, 1)) < 1e-4);
}

TEST_CASE("flop instrumentation counts work") {
  instrument::reset();
  Tensor<float> x({1, 2, 4, 4});
  Tensor<float> w({3, 2, 1, 1});
  Tensor<float> b({3});
  (void)conv_pointwise(x, w, b);
  CHECK(instrument::counters().flops > 0);
}
