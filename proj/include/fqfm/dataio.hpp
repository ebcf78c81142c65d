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

#include <algorithm>
#include <bit>
#include <cctype>
#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <limits>
#include <set>

#include "fqfm/network.hpp"

namespace fqfm {

template <class S>
struct ImageSample {
  Tensor<S> blurred;  // [3,H,W] in [0,1]
  Tensor<S> sharp;    // [3,H,W] in [0,1]
  Tensor<S> kernel;   // [k,k], unit sum; empty when loaded from disk
};

// ---------------------------------------------------------------------------
// PPM (P6, 8-bit)
// ---------------------------------------------------------------------------

namespace detail {

inline int ppm_next_token(const std::string& buf, std::size_t& pos, std::string& tok) {
  while (pos < buf.size()) {
    if (buf[pos] == '#') {
      while (pos < buf.size() && buf[pos] != '\n') ++pos;
    } else if (std::isspace(static_cast<unsigned char>(buf[pos]))) {
      ++pos;
    } else {
      break;
    }
  }
  const std::size_t start = pos;
  while (pos < buf.size() && !std::isspace(static_cast<unsigned char>(buf[pos])) &&
         buf[pos] != '#')
    ++pos;
  tok = buf.substr(start, pos - start);
  return static_cast<int>(start);
}

}  // namespace detail

template <class S>
Tensor<S> load_ppm(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  FQFM_REQUIRE(f.good(), "load_ppm: cannot open ", path);
  std::string buf((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  std::size_t pos = 0;
  std::string tok;
  int off = detail::ppm_next_token(buf, pos, tok);
  FQFM_REQUIRE(tok == "P6", "load_ppm: ", path, ": expected P6 magic at byte offset ", off);
  auto read_int = [&](const char* what) {
    const int at = detail::ppm_next_token(buf, pos, tok);
    char* end = nullptr;
    const long v = std::strtol(tok.c_str(), &end, 10);
    FQFM_REQUIRE(!tok.empty() && end == tok.c_str() + tok.size() && v > 0, "load_ppm: ", path,
                 ": bad ", what, " at byte offset ", at);
    return static_cast<std::int64_t>(v);
  };
  const std::int64_t w = read_int("width");
  const std::int64_t h = read_int("height");
  const int at = detail::ppm_next_token(buf, pos, tok);
  FQFM_REQUIRE(tok == "255", "load_ppm: ", path, ": expected maxval 255 at byte offset ", at);
  FQFM_REQUIRE(pos < buf.size() && std::isspace(static_cast<unsigned char>(buf[pos])),
               "load_ppm: ", path, ": missing separator after maxval at byte offset ", pos);
  ++pos;
  const std::size_t need = static_cast<std::size_t>(3 * w * h);
  FQFM_REQUIRE(buf.size() - pos >= need, "load_ppm: ", path, ": truncated payload at byte offset ",
               buf.size(), " (need ", need + pos, " bytes)");
  Tensor<S> t({3, h, w});
  const unsigned char* px = reinterpret_cast<const unsigned char*>(buf.data() + pos);
  for (std::int64_t y = 0; y < h; ++y)
    for (std::int64_t x = 0; x < w; ++x)
      for (std::int64_t c = 0; c < 3; ++c)
        t[(c * h + y) * w + x] = static_cast<S>(px[(y * w + x) * 3 + c] / 255.0);
  return t;
}

template <class S>
void save_ppm(const std::string& path, const Tensor<S>& t) {
  FQFM_REQUIRE(t.rank() == 3 && t.extent(0) == 3, "save_ppm: expected [3,H,W], got ",
               shape_str(t.shape()));
  const std::int64_t h = t.extent(1), w = t.extent(2);
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  FQFM_REQUIRE(f.good(), "save_ppm: cannot open ", path);
  f << "P6\n" << w << " " << h << "\n255\n";
  std::vector<unsigned char> px(static_cast<std::size_t>(3 * h * w));
  for (std::int64_t y = 0; y < h; ++y)
    for (std::int64_t x = 0; x < w; ++x)
      for (std::int64_t c = 0; c < 3; ++c) {
        const double v = std::floor(static_cast<double>(t[(c * h + y) * w + x]) * 255.0 + 0.5);
        px[(y * w + x) * 3 + c] = static_cast<unsigned char>(std::clamp(v, 0.0, 255.0));
      }
  f.write(reinterpret_cast<const char*>(px.data()), static_cast<std::streamsize>(px.size()));
  FQFM_REQUIRE(f.good(), "save_ppm: write failed for ", path);
}

// ---------------------------------------------------------------------------
// Blur synthesis
// ---------------------------------------------------------------------------

template <class S>
Tensor<S> gaussian_kernel(double sigma) {
  FQFM_REQUIRE(sigma > 0, "gaussian_kernel: sigma must be > 0, got ", sigma);
  const std::int64_t r = static_cast<std::int64_t>(std::ceil(3.0 * sigma));
  const std::int64_t k = 2 * r + 1;
  Tensor<S> ker({k, k});
  double sum = 0;
  for (std::int64_t y = 0; y < k; ++y)
    for (std::int64_t x = 0; x < k; ++x) {
      const double dy = static_cast<double>(y - r), dx = static_cast<double>(x - r);
      const double v = std::exp(-(dx * dx + dy * dy) / (2 * sigma * sigma));
      ker[y * k + x] = static_cast<S>(v);
      sum += v;
    }
  for (std::int64_t i = 0; i < ker.size(); ++i)
    ker[i] = static_cast<S>(static_cast<double>(ker[i]) / sum);
  return ker;
}

/// Straight-line kernel: a centered segment of the given length and angle,
/// rasterized by bilinear splatting and normalized to unit sum.
template <class S>
Tensor<S> motion_kernel(double length, double angle) {
  FQFM_REQUIRE(length >= 1, "motion_kernel: length must be >= 1, got ", length);
  const std::int64_t r = static_cast<std::int64_t>(std::ceil(length / 2.0));
  const std::int64_t k = 2 * r + 1;
  Tensor<S> ker({k, k});
  const double cx = std::cos(angle), cy = std::sin(angle);
  const std::int64_t steps = std::max<std::int64_t>(2, static_cast<std::int64_t>(length * 8));
  for (std::int64_t i = 0; i < steps; ++i) {
    const double t = (static_cast<double>(i) / static_cast<double>(steps - 1) - 0.5) * (length - 1);
    const double px = r + t * cx, py = r + t * cy;
    const std::int64_t x0 = static_cast<std::int64_t>(std::floor(px)),
                       y0 = static_cast<std::int64_t>(std::floor(py));
    const double fx = px - x0, fy = py - y0;
    auto splat = [&](std::int64_t y, std::int64_t x, double w) {
      if (y >= 0 && y < k && x >= 0 && x < k) ker[y * k + x] += static_cast<S>(w);
    };
    splat(y0, x0, (1 - fx) * (1 - fy));
    splat(y0, x0 + 1, fx * (1 - fy));
    splat(y0 + 1, x0, (1 - fx) * fy);
    splat(y0 + 1, x0 + 1, fx * fy);
  }
  double sum = 0;
  for (std::int64_t i = 0; i < ker.size(); ++i) sum += ker[i];
  for (std::int64_t i = 0; i < ker.size(); ++i)
    ker[i] = static_cast<S>(static_cast<double>(ker[i]) / sum);
  return ker;
}

/// Applies a [k,k] kernel over each channel of a [3,H,W] image with mirror
/// borders.
template <class S>
Tensor<S> blur_with_kernel(const Tensor<S>& img, const Tensor<S>& ker) {
  FQFM_REQUIRE(img.rank() == 3, "blur_with_kernel: expected [C,H,W], got ", shape_str(img.shape()));
  FQFM_REQUIRE(ker.rank() == 2 && ker.extent(0) == ker.extent(1) && ker.extent(0) % 2 == 1,
               "blur_with_kernel: kernel must be odd square, got ", shape_str(ker.shape()));
  const std::int64_t C = img.extent(0), H = img.extent(1), W = img.extent(2);
  const std::int64_t k = ker.extent(0), r = k / 2;
  Tensor<S> out(img.shape());
  for (std::int64_t c = 0; c < C; ++c)
    for (std::int64_t y = 0; y < H; ++y)
      for (std::int64_t x = 0; x < W; ++x) {
        double acc = 0;
        for (std::int64_t i = 0; i < k; ++i) {
          const std::int64_t sy = mirror_index(y + i - r, H);
          for (std::int64_t j = 0; j < k; ++j)
            acc += static_cast<double>(ker[i * k + j]) *
                   static_cast<double>(img[(c * H + sy) * W + mirror_index(x + j - r, W)]);
        }
        out[(c * H + y) * W + x] = static_cast<S>(acc);
      }
  return out;
}

enum class BlurKind { gaussian, linear_motion };

struct SynthParams {
  double sigma_lo = 0.8, sigma_hi = 1.6;  // gaussian sigma draw range
  double len_lo = 5.0, len_hi = 9.0;      // motion length draw range
};

template <class S>
ImageSample<S> synth_blur(const Tensor<S>& sharp, BlurKind kind, const SynthParams& p,
                          std::uint64_t seed) {
  FQFM_REQUIRE(p.sigma_lo > 0 && p.sigma_hi >= p.sigma_lo, "synth_blur: bad sigma range [",
               p.sigma_lo, ",", p.sigma_hi, "]");
  FQFM_REQUIRE(p.len_lo >= 1 && p.len_hi >= p.len_lo, "synth_blur: bad length range [", p.len_lo,
               ",", p.len_hi, "]");
  Rng rng(seed);
  Tensor<S> ker;
  if (kind == BlurKind::gaussian) {
    ker = gaussian_kernel<S>(rng.uniform(p.sigma_lo, p.sigma_hi));
  } else {
    const double len = rng.uniform(p.len_lo, p.len_hi);
    ker = motion_kernel<S>(len, rng.uniform(0.0, std::numbers::pi));
  }
  ImageSample<S> s;
  s.blurred = blur_with_kernel(sharp, ker);
  s.sharp = sharp;
  s.kernel = std::move(ker);
  return s;
}

/// Piecewise-smooth random test card: per-channel gradients, soft-edged
/// rectangles, and sinusoidal texture, clamped to [0,1]. Structured enough
/// that blurring costs several dB.
template <class S>
Tensor<S> synth_sharp_image(std::int64_t h, std::int64_t w, std::uint64_t seed) {
  Rng rng(seed);
  Tensor<S> img({3, h, w});
  double gx[3], gy[3], base[3];
  for (int c = 0; c < 3; ++c) {
    base[c] = rng.uniform(0.25, 0.75);
    gx[c] = rng.uniform(-0.3, 0.3);
    gy[c] = rng.uniform(-0.3, 0.3);
  }
  for (int c = 0; c < 3; ++c)
    for (std::int64_t y = 0; y < h; ++y)
      for (std::int64_t x = 0; x < w; ++x)
        img[(c * h + y) * w + x] = static_cast<S>(
            base[c] + gx[c] * (static_cast<double>(x) / w - 0.5) +
            gy[c] * (static_cast<double>(y) / h - 0.5));
  const int n_rects = 6;
  for (int rct = 0; rct < n_rects; ++rct) {
    const std::int64_t rw = 4 + static_cast<std::int64_t>(rng.uniform_int(w / 2));
    const std::int64_t rh = 4 + static_cast<std::int64_t>(rng.uniform_int(h / 2));
    const std::int64_t x0 = static_cast<std::int64_t>(rng.uniform_int(std::max<std::int64_t>(1, w - rw)));
    const std::int64_t y0 = static_cast<std::int64_t>(rng.uniform_int(std::max<std::int64_t>(1, h - rh)));
    double col[3];
    for (int c = 0; c < 3; ++c) col[c] = rng.uniform(0.0, 1.0);
    for (int c = 0; c < 3; ++c)
      for (std::int64_t y = y0; y < std::min(h, y0 + rh); ++y)
        for (std::int64_t x = x0; x < std::min(w, x0 + rw); ++x)
          img[(c * h + y) * w + x] = static_cast<S>(0.25 * img[(c * h + y) * w + x] + 0.75 * col[c]);
  }
  const double fx = rng.uniform(0.2, 0.45), fy = rng.uniform(0.2, 0.45);
  const double amp = rng.uniform(0.08, 0.18), phase = rng.uniform(0.0, 6.28);
  for (int c = 0; c < 3; ++c)
    for (std::int64_t y = 0; y < h; ++y)
      for (std::int64_t x = 0; x < w; ++x) {
        double v = img[(c * h + y) * w + x] +
                   amp * std::sin(2 * std::numbers::pi * (fx * x + fy * y) + phase + c);
        img[(c * h + y) * w + x] = static_cast<S>(std::clamp(v, 0.0, 1.0));
      }
  return img;
}

template <class S>
Tensor<S> flip_h(const Tensor<S>& t) {
  const std::int64_t C = t.extent(0), H = t.extent(1), W = t.extent(2);
  Tensor<S> out(t.shape());
  for (std::int64_t c = 0; c < C; ++c)
    for (std::int64_t y = 0; y < H; ++y)
      for (std::int64_t x = 0; x < W; ++x) out[(c * H + y) * W + x] = t[(c * H + y) * W + (W - 1 - x)];
  return out;
}

template <class S>
Tensor<S> flip_v(const Tensor<S>& t) {
  const std::int64_t C = t.extent(0), H = t.extent(1), W = t.extent(2);
  Tensor<S> out(t.shape());
  for (std::int64_t c = 0; c < C; ++c)
    for (std::int64_t y = 0; y < H; ++y)
      for (std::int64_t x = 0; x < W; ++x) out[(c * H + y) * W + x] = t[(c * H + (H - 1 - y)) * W + x];
  return out;
}

template <class S>
Tensor<S> crop3(const Tensor<S>& t, std::int64_t y0, std::int64_t x0, std::int64_t ch,
                std::int64_t cw) {
  const std::int64_t C = t.extent(0), H = t.extent(1), W = t.extent(2);
  FQFM_REQUIRE(y0 >= 0 && x0 >= 0 && y0 + ch <= H && x0 + cw <= W, "crop3: window out of range");
  Tensor<S> out({C, ch, cw});
  for (std::int64_t c = 0; c < C; ++c)
    for (std::int64_t y = 0; y < ch; ++y)
      std::copy_n(&t[(c * H + y0 + y) * W + x0], cw, &out[(c * ch + y) * cw]);
  return out;
}

// ---------------------------------------------------------------------------
// Quality metrics
// ---------------------------------------------------------------------------

template <class S>
double psnr(const Tensor<S>& a, const Tensor<S>& b, double peak = 1.0) {
  FQFM_REQUIRE(a.shape() == b.shape(), "psnr: shape mismatch ", shape_str(a.shape()), " vs ",
               shape_str(b.shape()));
  double mse = 0;
  for (std::int64_t i = 0; i < a.size(); ++i) {
    const double d = static_cast<double>(a[i]) - static_cast<double>(b[i]);
    mse += d * d;
  }
  mse /= static_cast<double>(a.size());
  if (mse == 0) return std::numeric_limits<double>::infinity();
  return 10.0 * std::log10(peak * peak / mse);
}

/// Single-scale SSIM: 11x11 Gaussian window (sigma 1.5), K1=0.01, K2=0.03,
/// peak 1.0, valid-region convolution, grayscale by channel mean.
template <class S>
double ssim(const Tensor<S>& a, const Tensor<S>& b) {
  FQFM_REQUIRE(a.shape() == b.shape(), "ssim: shape mismatch ", shape_str(a.shape()), " vs ",
               shape_str(b.shape()));
  FQFM_REQUIRE(a.rank() == 3, "ssim: expected [C,H,W], got ", shape_str(a.shape()));
  const std::int64_t C = a.extent(0), H = a.extent(1), W = a.extent(2);
  FQFM_REQUIRE(H >= 11 && W >= 11, "ssim: image ", H, "x", W, " smaller than the 11x11 window");
  std::vector<double> ga(static_cast<std::size_t>(H * W)), gb(static_cast<std::size_t>(H * W));
  for (std::int64_t y = 0; y < H; ++y)
    for (std::int64_t x = 0; x < W; ++x) {
      double sa = 0, sb = 0;
      for (std::int64_t c = 0; c < C; ++c) {
        sa += a[(c * H + y) * W + x];
        sb += b[(c * H + y) * W + x];
      }
      ga[y * W + x] = sa / C;
      gb[y * W + x] = sb / C;
    }
  double win[11][11], wsum = 0;
  for (int i = 0; i < 11; ++i)
    for (int j = 0; j < 11; ++j) {
      const double dy = i - 5, dx = j - 5;
      win[i][j] = std::exp(-(dx * dx + dy * dy) / (2 * 1.5 * 1.5));
      wsum += win[i][j];
    }
  for (auto& row : win)
    for (double& v : row) v /= wsum;
  const double c1 = 0.01 * 0.01, c2 = 0.03 * 0.03;
  double acc = 0;
  std::int64_t cnt = 0;
  for (std::int64_t y = 0; y + 11 <= H; ++y)
    for (std::int64_t x = 0; x + 11 <= W; ++x) {
      double mu_a = 0, mu_b = 0, aa = 0, bb = 0, ab = 0;
      for (int i = 0; i < 11; ++i)
        for (int j = 0; j < 11; ++j) {
          const double va = ga[(y + i) * W + x + j], vb = gb[(y + i) * W + x + j];
          mu_a += win[i][j] * va;
          mu_b += win[i][j] * vb;
          aa += win[i][j] * va * va;
          bb += win[i][j] * vb * vb;
          ab += win[i][j] * va * vb;
        }
      const double var_a = aa - mu_a * mu_a, var_b = bb - mu_b * mu_b, cov = ab - mu_a * mu_b;
      acc += ((2 * mu_a * mu_b + c1) * (2 * cov + c2)) /
             ((mu_a * mu_a + mu_b * mu_b + c1) * (var_a + var_b + c2));
      ++cnt;
    }
  return acc / static_cast<double>(cnt);
}

// ---------------------------------------------------------------------------
// Checkpoint container ("FQFM1")
// ---------------------------------------------------------------------------

// Entry dtype tags.
inline constexpr std::uint8_t kDtypeF32 = 1;
inline constexpr std::uint8_t kDtypeF64 = 2;
inline constexpr std::uint8_t kDtypeI64 = 3;

struct CheckpointEntry {
  std::string name;
  std::uint8_t dtype = 0;
  Shape shape;
  std::vector<unsigned char> payload;
};

namespace detail {

static_assert(std::endian::native == std::endian::little,
              "checkpoint container assumes a little-endian host");

inline void ck_write_u32(std::string& out, std::uint32_t v) {
  out.append(reinterpret_cast<const char*>(&v), 4);
}
inline void ck_write_i64(std::string& out, std::int64_t v) {
  out.append(reinterpret_cast<const char*>(&v), 8);
}

struct CkReader {
  const std::string& buf;
  std::size_t pos = 0;
  void need(std::size_t n, const char* what) {
    FQFM_REQUIRE(buf.size() - pos >= n, "load_checkpoint: truncated ", what, " at byte offset ",
                 pos);
  }
  std::uint32_t u32(const char* what) {
    need(4, what);
    std::uint32_t v;
    std::memcpy(&v, buf.data() + pos, 4);
    pos += 4;
    return v;
  }
  std::int64_t i64(const char* what) {
    need(8, what);
    std::int64_t v;
    std::memcpy(&v, buf.data() + pos, 8);
    pos += 8;
    return v;
  }
  std::uint8_t u8(const char* what) {
    need(1, what);
    return static_cast<std::uint8_t>(buf[pos++]);
  }
};

}  // namespace detail

inline std::size_t dtype_size(std::uint8_t tag) {
  switch (tag) {
    case kDtypeF32: return 4;
    case kDtypeF64: return 8;
    case kDtypeI64: return 8;
  }
  FQFM_REQUIRE(false, "unknown dtype tag ", static_cast<int>(tag));
  return 0;
}

inline void save_container(const std::string& path, const std::vector<CheckpointEntry>& entries) {
  std::string out = "FQFM1";
  detail::ck_write_u32(out, static_cast<std::uint32_t>(entries.size()));
  for (const CheckpointEntry& e : entries) {
    detail::ck_write_u32(out, static_cast<std::uint32_t>(e.name.size()));
    out += e.name;
    out.push_back(static_cast<char>(e.dtype));
    out.push_back(static_cast<char>(e.shape.size()));
    std::int64_t n = 1;
    for (std::int64_t ext : e.shape) {
      detail::ck_write_i64(out, ext);
      n *= ext;
    }
    FQFM_REQUIRE(e.payload.size() == static_cast<std::size_t>(n) * dtype_size(e.dtype),
                 "save_container: entry ", e.name, " payload length mismatch");
    out.append(reinterpret_cast<const char*>(e.payload.data()), e.payload.size());
  }
  const std::string tmp = path + ".tmp";
  {
    std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
    FQFM_REQUIRE(f.good(), "save_container: cannot open ", tmp);
    f.write(out.data(), static_cast<std::streamsize>(out.size()));
    FQFM_REQUIRE(f.good(), "save_container: write failed for ", tmp);
  }
  std::filesystem::rename(tmp, path);
}

inline std::vector<CheckpointEntry> load_container(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  FQFM_REQUIRE(f.good(), "load_checkpoint: cannot open ", path);
  std::string buf((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  detail::CkReader r{buf};
  r.need(5, "magic");
  FQFM_REQUIRE(buf.compare(0, 5, "FQFM1") == 0, "load_checkpoint: bad magic in ", path);
  r.pos = 5;
  const std::uint32_t count = r.u32("entry count");
  std::vector<CheckpointEntry> entries;
  std::set<std::string> seen;
  for (std::uint32_t i = 0; i < count; ++i) {
    CheckpointEntry e;
    const std::uint32_t name_len = r.u32("name length");
    r.need(name_len, "name");
    e.name = buf.substr(r.pos, name_len);
    r.pos += name_len;
    FQFM_REQUIRE(seen.insert(e.name).second, "load_checkpoint: duplicate entry ", e.name);
    e.dtype = r.u8("dtype tag");
    const std::size_t elem = dtype_size(e.dtype);
    const std::uint8_t rank = r.u8("rank");
    FQFM_REQUIRE(rank >= 1 && rank <= 5, "load_checkpoint: entry ", e.name, " has bad rank ",
                 static_cast<int>(rank));
    std::int64_t n = 1;
    for (std::uint8_t a = 0; a < rank; ++a) {
      const std::int64_t ext = r.i64("extent");
      FQFM_REQUIRE(ext >= 1, "load_checkpoint: entry ", e.name, " has bad extent ", ext);
      e.shape.push_back(ext);
      n *= ext;
    }
    const std::size_t bytes = static_cast<std::size_t>(n) * elem;
    r.need(bytes, "payload");
    e.payload.assign(buf.begin() + static_cast<std::ptrdiff_t>(r.pos),
                     buf.begin() + static_cast<std::ptrdiff_t>(r.pos + bytes));
    r.pos += bytes;
    entries.push_back(std::move(e));
  }
  return entries;
}

template <class S>
constexpr std::uint8_t dtype_tag() {
  if constexpr (std::is_same_v<S, float>) return kDtypeF32;
  else return kDtypeF64;
}

template <class S>
CheckpointEntry to_entry(const std::string& name, const Tensor<S>& t) {
  CheckpointEntry e;
  e.name = name;
  e.dtype = dtype_tag<S>();
  e.shape = t.shape();
  e.payload.resize(static_cast<std::size_t>(t.size()) * sizeof(S));
  std::memcpy(e.payload.data(), t.data(), e.payload.size());
  return e;
}

inline CheckpointEntry to_entry_i64(const std::string& name, const std::vector<std::int64_t>& v) {
  CheckpointEntry e;
  e.name = name;
  e.dtype = kDtypeI64;
  e.shape = {static_cast<std::int64_t>(v.size())};
  e.payload.resize(v.size() * 8);
  std::memcpy(e.payload.data(), v.data(), e.payload.size());
  return e;
}

template <class S>
void save_checkpoint(const ParameterStore<S>& ps, const std::string& path) {
  std::vector<CheckpointEntry> entries;
  for (const auto& [name, t] : ps) entries.push_back(to_entry(name, t));
  save_container(path, entries);
}

template <class S>
ParameterStore<S> load_checkpoint(const std::string& path) {
  ParameterStore<S> ps;
  for (CheckpointEntry& e : load_container(path)) {
    if (e.name.rfind("meta.", 0) == 0) continue;
    FQFM_REQUIRE(e.dtype == dtype_tag<S>(), "load_checkpoint: entry ", e.name, " has dtype tag ",
                 static_cast<int>(e.dtype), ", expected ", static_cast<int>(dtype_tag<S>()));
    Tensor<S> t(e.shape);
    std::memcpy(t.data(), e.payload.data(), e.payload.size());
    ps.put(e.name, std::move(t));
  }
  return ps;
}

inline std::vector<std::int64_t> encode_config(const NetworkConfig& cfg) {
  std::vector<std::int64_t> v = {cfg.scales,
                                 cfg.base_channels,
                                 static_cast<std::int64_t>(cfg.fsas_placement),
                                 static_cast<std::int64_t>(cfg.ffn_variant),
                                 cfg.patch,
                                 cfg.expansion};
  v.insert(v.end(), cfg.enc_blocks.begin(), cfg.enc_blocks.end());
  v.insert(v.end(), cfg.dec_blocks.begin(), cfg.dec_blocks.end());
  return v;
}

inline NetworkConfig decode_config(const std::vector<std::int64_t>& v) {
  FQFM_REQUIRE(v.size() >= 6, "decode_config: malformed config entry");
  NetworkConfig cfg;
  cfg.scales = v[0];
  cfg.base_channels = v[1];
  cfg.fsas_placement = static_cast<FsasPlacement>(v[2]);
  cfg.ffn_variant = static_cast<FfnVariant>(v[3]);
  cfg.patch = v[4];
  cfg.expansion = v[5];
  FQFM_REQUIRE(static_cast<std::int64_t>(v.size()) == 6 + 2 * cfg.scales,
               "decode_config: malformed config entry");
  cfg.enc_blocks.assign(v.begin() + 6, v.begin() + 6 + cfg.scales);
  cfg.dec_blocks.assign(v.begin() + 6 + cfg.scales, v.end());
  cfg.validate();
  return cfg;
}

template <class S>
void save_model(const Model<S>& m, const std::string& path) {
  std::vector<CheckpointEntry> entries;
  entries.push_back(to_entry_i64("meta.cfg", encode_config(m.cfg)));
  for (const auto& [name, t] : m.params) entries.push_back(to_entry(name, t));
  save_container(path, entries);
}

/// Peeks at the stored parameter dtype without materializing tensors.
inline std::uint8_t model_dtype(const std::string& path) {
  for (const CheckpointEntry& e : load_container(path))
    if (e.name.rfind("meta.", 0) != 0) return e.dtype;
  FQFM_REQUIRE(false, "model_dtype: no parameter entries in ", path);
  return 0;
}

template <class S>
Model<S> load_model(const std::string& path) {
  NetworkConfig cfg;
  bool have_cfg = false;
  ParameterStore<S> ps;
  for (CheckpointEntry& e : load_container(path)) {
    if (e.name == "meta.cfg") {
      FQFM_REQUIRE(e.dtype == kDtypeI64, "load_model: meta.cfg must be i64");
      std::vector<std::int64_t> v(e.payload.size() / 8);
      std::memcpy(v.data(), e.payload.data(), e.payload.size());
      cfg = decode_config(v);
      have_cfg = true;
      continue;
    }
    if (e.name.rfind("meta.", 0) == 0) continue;
    FQFM_REQUIRE(e.dtype == dtype_tag<S>(), "load_model: entry ", e.name, " has dtype tag ",
                 static_cast<int>(e.dtype), ", expected ", static_cast<int>(dtype_tag<S>()));
    Tensor<S> t(e.shape);
    std::memcpy(t.data(), e.payload.data(), e.payload.size());
    ps.put(e.name, std::move(t));
  }
  FQFM_REQUIRE(have_cfg, "load_model: missing meta.cfg entry in ", path);
  Model<S> fresh = build<S>(cfg, 0);
  FQFM_REQUIRE(fresh.params.count() == ps.count(), "load_model: parameter set mismatch (have ",
               ps.count(), ", config needs ", fresh.params.count(), ")");
  for (auto& [name, t] : fresh.params) {
    const Tensor<S>& loaded = ps.at(name);
    FQFM_REQUIRE(loaded.shape() == t.shape(), "load_model: shape mismatch for ", name);
    t = loaded;
  }
  return fresh;
}

// ---------------------------------------------------------------------------
// Pair folders: <stem>_blur.ppm / <stem>_sharp.ppm
// ---------------------------------------------------------------------------

template <class S>
std::vector<ImageSample<S>> load_pairs(const std::string& dir) {
  namespace fs = std::filesystem;
  FQFM_REQUIRE(fs::is_directory(dir), "load_pairs: not a directory: ", dir);
  std::vector<std::string> stems;
  for (const auto& entry : fs::directory_iterator(dir)) {
    const std::string name = entry.path().filename().string();
    const std::string suffix = "_blur.ppm";
    if (name.size() > suffix.size() && name.compare(name.size() - suffix.size(), suffix.size(), suffix) == 0)
      stems.push_back(name.substr(0, name.size() - suffix.size()));
  }
  std::sort(stems.begin(), stems.end());
  FQFM_REQUIRE(!stems.empty(), "load_pairs: no *_blur.ppm files in ", dir);
  std::vector<ImageSample<S>> out;
  for (const std::string& stem : stems) {
    ImageSample<S> s;
    s.blurred = load_ppm<S>(dir + "/" + stem + "_blur.ppm");
    s.sharp = load_ppm<S>(dir + "/" + stem + "_sharp.ppm");
    FQFM_REQUIRE(s.blurred.shape() == s.sharp.shape(), "load_pairs: shape mismatch for stem ",
                 stem);
    out.push_back(std::move(s));
  }
  return out;
}

}  // namespace fqfm
