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

#include <cstdio>

#include "fqfm/autodiff.hpp"
#include "fqfm/dataio.hpp"

namespace fqfm {

struct TrainConfig {
  double lr_max = 1e-3;
  double lr_min = 1e-7;
  std::int64_t total_steps = 2000;
  std::int64_t batch = 2;
  std::int64_t crop = 64;
  double lambda_freq = 0.1;
  std::uint64_t seed = 0;

  void validate() const {
    FQFM_REQUIRE(lr_min <= lr_max, "config field lr_min: must be <= lr_max");
    FQFM_REQUIRE(total_steps >= 1, "config field total_steps: must be >= 1, got ", total_steps);
    FQFM_REQUIRE(batch >= 1, "config field batch: must be >= 1, got ", batch);
    FQFM_REQUIRE(crop >= 1, "config field crop: must be >= 1, got ", crop);
    FQFM_REQUIRE(lambda_freq >= 0, "config field lambda_freq: must be >= 0, got ", lambda_freq);
  }
};

/// mean|pred-target| + lambda * mean|F(pred)-F(target)|, the frequency term
/// over the zero-padded full plane (padded to powers of two). Written against
/// the executor surface; identical arithmetic direct or recorded.
template <class E>
typename E::V loss_op(E& e, const typename E::V& pred, const typename E::V& target,
                      double lambda) {
  using S = typename E::Scalar;
  const Shape ps = e.shape_of(pred), ts = e.shape_of(target);
  FQFM_REQUIRE(ps == ts, "loss: shape mismatch ", shape_str(ps), " vs ", shape_str(ts));
  auto l1 = e.l1_mean(pred, target);
  auto diff = e.sub(pred, target);
  auto fa = e.spec_abs_mean(e.fft2(e.zero_pad(diff, next_pow2(ps[2]), next_pow2(ps[3]))));
  return e.add_scaled(l1, fa, static_cast<S>(lambda));
}

template <class S>
double loss_value(const Tensor<S>& pred, const Tensor<S>& target, double lambda) {
  ParameterStore<S> empty;
  PlainExec<S> e(empty);
  return static_cast<double>(loss_op(e, pred, target, lambda)[0]);
}

inline double cosine_lr(std::int64_t step, std::int64_t total, double lr_max, double lr_min) {
  FQFM_REQUIRE(step >= 0 && total >= 1, "cosine_lr: bad step/total");
  if (step > total) return lr_min;
  const double t = static_cast<double>(step) / static_cast<double>(total);
  return lr_min + 0.5 * (lr_max - lr_min) * (1.0 + std::cos(std::numbers::pi * t));
}

template <class S>
struct AdamState {
  std::int64_t t = 0;
  double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
  std::map<std::string, Tensor<S>> m, v;
};

template <class S>
void adam_step(ParameterStore<S>& params, const std::map<std::string, Tensor<S>>& grads,
               AdamState<S>& st, double lr) {
  st.t += 1;
  const double bc1 = 1.0 - std::pow(st.beta1, static_cast<double>(st.t));
  const double bc2 = 1.0 - std::pow(st.beta2, static_cast<double>(st.t));
  for (auto& [name, p] : params) {
    auto git = grads.find(name);
    FQFM_REQUIRE(git != grads.end(), "adam_step: missing gradient for ", name);
    const Tensor<S>& g = git->second;
    FQFM_REQUIRE(g.shape() == p.shape(), "adam_step: gradient shape mismatch for ", name);
    FQFM_REQUIRE(!has_nan(g), "training halted: NaN gradient in ", name);
    Tensor<S>& m = st.m.try_emplace(name, Tensor<S>(p.shape())).first->second;
    Tensor<S>& v = st.v.try_emplace(name, Tensor<S>(p.shape())).first->second;
    using Arr = Eigen::Array<S, Eigen::Dynamic, 1>;
    Eigen::Map<Arr> pm(p.data(), p.size()), mm(m.data(), m.size()), vm(v.data(), v.size());
    Eigen::Map<const Arr> gm(g.data(), g.size());
    mm = static_cast<S>(st.beta1) * mm + static_cast<S>(1 - st.beta1) * gm;
    vm = static_cast<S>(st.beta2) * vm + static_cast<S>(1 - st.beta2) * gm.square();
    pm -= static_cast<S>(lr) * (mm / static_cast<S>(bc1)) /
          ((vm / static_cast<S>(bc2)).sqrt() + static_cast<S>(st.eps));
  }
}

struct TrainLog {
  std::vector<double> losses;                          // per step
  std::vector<double> lrs;                             // per step
  std::vector<std::pair<std::int64_t, double>> psnrs;  // (step, held-out mean PSNR)
};

template <class S>
std::vector<std::size_t> validation_indices(std::size_t n) {
  std::vector<std::size_t> v;
  for (std::size_t i = 0; i < n; i += 10) v.push_back(i);
  return v;
}

template <class S>
double validation_psnr(const Model<S>& m, const std::vector<ImageSample<S>>& data,
                       const std::vector<std::size_t>& val_idx) {
  double acc = 0;
  for (std::size_t i : val_idx) {
    const Tensor<S>& blur = data[i].blurred;
    Tensor<S> in({1, blur.extent(0), blur.extent(1), blur.extent(2)});
    std::copy_n(blur.data(), blur.size(), in.data());
    Tensor<S> out = forward(m, in);
    Tensor<S> pred({blur.extent(0), blur.extent(1), blur.extent(2)});
    std::copy_n(out.data(), pred.size(), pred.data());
    acc += psnr(pred, data[i].sharp);
  }
  return acc / static_cast<double>(val_idx.size());
}

/// Seeded single-threaded loop: random crops and flips from one RNG stream,
/// one Adam step per batch, per-step CSV row, held-out PSNR every `val_every`
/// steps. Bit-deterministic for a fixed seed/config/dataset.
template <class S>
TrainLog train_loop(Model<S>& m, const std::vector<ImageSample<S>>& data, const TrainConfig& cfg,
                    const std::string& metrics_csv = "", std::int64_t val_every = 100) {
  cfg.validate();
  FQFM_REQUIRE(!data.empty(), "train_loop: empty dataset");
  const std::vector<std::size_t> val_idx = validation_indices<S>(data.size());
  std::vector<std::size_t> train_idx;
  for (std::size_t i = 0; i < data.size(); ++i)
    if (std::find(val_idx.begin(), val_idx.end(), i) == val_idx.end()) train_idx.push_back(i);
  FQFM_REQUIRE(!train_idx.empty(), "train_loop: dataset too small for a train/validation split");
  for (const ImageSample<S>& s : data)
    FQFM_REQUIRE(s.sharp.extent(1) >= cfg.crop && s.sharp.extent(2) >= cfg.crop,
                 "train_loop: image smaller than crop ", cfg.crop);

  std::ofstream csv;
  if (!metrics_csv.empty()) {
    csv.open(metrics_csv, std::ios::trunc);
    FQFM_REQUIRE(csv.good(), "train_loop: cannot open metrics file ", metrics_csv);
    csv << "step,lr,loss,psnr\n";
  }
  char buf[256];

  Rng rng(cfg.seed);
  AdamState<S> st;
  TrainLog log;
  for (std::int64_t step = 1; step <= cfg.total_steps; ++step) {
    Tensor<S> bin({cfg.batch, 3, cfg.crop, cfg.crop});
    Tensor<S> btgt({cfg.batch, 3, cfg.crop, cfg.crop});
    for (std::int64_t bi = 0; bi < cfg.batch; ++bi) {
      const ImageSample<S>& s = data[train_idx[rng.uniform_int(train_idx.size())]];
      const std::int64_t H = s.sharp.extent(1), W = s.sharp.extent(2);
      const std::int64_t y0 = static_cast<std::int64_t>(rng.uniform_int(static_cast<std::uint64_t>(H - cfg.crop + 1)));
      const std::int64_t x0 = static_cast<std::int64_t>(rng.uniform_int(static_cast<std::uint64_t>(W - cfg.crop + 1)));
      Tensor<S> cb = crop3(s.blurred, y0, x0, cfg.crop, cfg.crop);
      Tensor<S> cs = crop3(s.sharp, y0, x0, cfg.crop, cfg.crop);
      if (rng.coin()) {
        cb = flip_h(cb);
        cs = flip_h(cs);
      }
      if (rng.coin()) {
        cb = flip_v(cb);
        cs = flip_v(cs);
      }
      std::copy_n(cb.data(), cb.size(), bin.data() + bi * cb.size());
      std::copy_n(cs.data(), cs.size(), btgt.data() + bi * cs.size());
    }

    Tape<S> tape;
    TapedExec<S> e(tape, m.params);
    auto in = e.input(std::move(bin));
    auto pred = forward_net(e, m.cfg, in);
    auto loss = loss_op(e, pred, e.input(std::move(btgt)), cfg.lambda_freq);
    const double loss_val = static_cast<double>(tape.val(loss)[0]);
    FQFM_REQUIRE(!std::isnan(loss_val), "training halted: NaN loss at step ", step);
    tape.backward(loss);

    const double lr = cosine_lr(step - 1, cfg.total_steps, cfg.lr_max, cfg.lr_min);
    adam_step(m.params, e.param_grads(), st, lr);

    log.losses.push_back(loss_val);
    log.lrs.push_back(lr);
    std::string psnr_field;
    if (step % val_every == 0 || step == cfg.total_steps) {
      const double p = validation_psnr(m, data, val_idx);
      log.psnrs.emplace_back(step, p);
      std::snprintf(buf, sizeof buf, "%.17g", p);
      psnr_field = buf;
    }
    if (csv.is_open()) {
      std::snprintf(buf, sizeof buf, "%lld,%.17g,%.17g,", static_cast<long long>(step), lr,
                    loss_val);
      csv << buf << psnr_field << "\n";
    }
  }
  return log;
}

}  // namespace fqfm
