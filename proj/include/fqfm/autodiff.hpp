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

#include <functional>
#include <set>

#include "fqfm/exec.hpp"

namespace fqfm {

/// Reverse-mode tape. Holds every intermediate value; node closures read
/// values and accumulate cotangents by handle. Complex cotangents follow the
/// pairing c = dL/dRe + i*dL/dIm, under which the adjoint of a complex-linear
/// map is its conjugate transpose.
template <class S>
class Tape {
 public:
  struct Var {
    std::int64_t id = -1;
  };
  struct CVar {
    std::int64_t id = -1;
  };

  static const std::set<std::string>& registered_primitives() {
    static const std::set<std::string> names = {
        "conv_pointwise", "conv_depthwise3x3", "layer_norm",     "softmax",
        "geglu",          "unfold_patches",    "fold_patches",   "fft2",
        "ifft2",          "cmul_conj",         "spec_scale",     "mul",
        "add",            "sub",               "add_scaled",     "scale",
        "slice_channels", "concat_channels",   "space_to_depth", "depth_to_space",
        "mirror_pad_hw",  "crop_hw",           "zero_pad_hw",    "l1_mean",
        "spec_abs_mean",  "sum_all"};
    return names;
  }

  Var leaf(Tensor<S> value) { return new_var(std::move(value)); }

  Var new_var(Tensor<S> value) {
    vals_.push_back(std::move(value));
    grads_.emplace_back();
    return Var{static_cast<std::int64_t>(vals_.size()) - 1};
  }
  CVar new_cvar(CTensor<S> value) {
    cvals_.push_back(std::move(value));
    cgrads_.emplace_back();
    return CVar{static_cast<std::int64_t>(cvals_.size()) - 1};
  }

  const Tensor<S>& val(Var v) const { return vals_[static_cast<std::size_t>(v.id)]; }
  const CTensor<S>& cval(CVar v) const { return cvals_[static_cast<std::size_t>(v.id)]; }

  bool has_grad(Var v) const { return !grads_[static_cast<std::size_t>(v.id)].empty(); }
  bool has_grad(CVar v) const { return !cgrads_[static_cast<std::size_t>(v.id)].empty(); }

  Tensor<S>& grad(Var v) {
    auto& g = grads_[static_cast<std::size_t>(v.id)];
    if (g.empty()) g = Tensor<S>(val(v).shape());
    return g;
  }
  CTensor<S>& cgrad(CVar v) {
    auto& g = cgrads_[static_cast<std::size_t>(v.id)];
    if (g.empty()) g = CTensor<S>(cval(v).shape());
    return g;
  }

  void acc(Var v, const Tensor<S>& t) {
    Tensor<S>& g = grad(v);
    for (std::int64_t i = 0; i < g.size(); ++i) g[i] += t[i];
  }
  void acc(CVar v, const CTensor<S>& t) {
    CTensor<S>& g = cgrad(v);
    for (std::int64_t i = 0; i < g.size(); ++i) g[i] += t[i];
  }

  void record(const std::string& name, std::function<void()> backward_fn) {
    FQFM_REQUIRE(registered_primitives().count(name), "unregistered primitive: ", name);
    nodes_.push_back({std::move(backward_fn)});
  }

  void backward(Var loss) {
    FQFM_REQUIRE(val(loss).size() == 1, "backward: loss must be scalar, got ",
                 shape_str(val(loss).shape()));
    grad(loss)[0] = S(1);
    for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) it->fn();
  }

  std::size_t num_nodes() const { return nodes_.size(); }

 private:
  struct Node {
    std::function<void()> fn;
  };
  std::vector<Tensor<S>> vals_;
  std::vector<Tensor<S>> grads_;
  std::vector<CTensor<S>> cvals_;
  std::vector<CTensor<S>> cgrads_;
  std::vector<Node> nodes_;
};

/// Recording executor: same surface as PlainExec, evaluating eagerly through
/// the pure kernels while pushing adjoint closures onto the tape.
template <class S>
class TapedExec {
 public:
  using Scalar = S;
  using V = typename Tape<S>::Var;
  using CV = typename Tape<S>::CVar;

  TapedExec(Tape<S>& tape, const ParameterStore<S>& ps) : t_(&tape), ps_(&ps) {}

  Tape<S>& tape() { return *t_; }

  V input(Tensor<S> x) { return t_->leaf(std::move(x)); }

  V param(const std::string& name) {
    auto it = param_vars_.find(name);
    if (it != param_vars_.end()) return it->second;
    V v = t_->leaf(ps_->at(name));
    param_vars_.emplace(name, v);
    return v;
  }

  Shape shape_of(V x) const { return t_->val(x).shape(); }

  /// Gradients for every parameter touched by the recorded graph.
  std::map<std::string, Tensor<S>> param_grads() {
    std::map<std::string, Tensor<S>> out;
    for (const auto& [name, v] : param_vars_) out.emplace(name, t_->grad(v));
    return out;
  }

  V conv_pw(V x, const std::string& prefix) {
    V w = param(prefix + ".w"), b = param(prefix + ".b");
    V out = t_->new_var(conv_pointwise(t_->val(x), t_->val(w), t_->val(b)));
    t_->record("conv_pointwise", [t = t_, x, w, b, out] {
      if (!t->has_grad(out)) return;
      const Tensor<S>& g = t->grad(out);
      Tensor<S> gx, gw, gb;
      conv_pointwise_bwd(t->val(x), t->val(w), g, &gx, &gw, &gb);
      t->acc(x, gx);
      t->acc(w, gw);
      t->acc(b, gb);
    });
    return out;
  }

  V conv_dw(V x, const std::string& prefix) {
    V w = param(prefix + ".w"), b = param(prefix + ".b");
    V out = t_->new_var(conv_depthwise3x3(t_->val(x), t_->val(w), t_->val(b)));
    t_->record("conv_depthwise3x3", [t = t_, x, w, b, out] {
      if (!t->has_grad(out)) return;
      const Tensor<S>& g = t->grad(out);
      Tensor<S> gx, gw, gb;
      conv_depthwise3x3_bwd(t->val(x), t->val(w), g, &gx, &gw, &gb);
      t->acc(x, gx);
      t->acc(w, gw);
      t->acc(b, gb);
    });
    return out;
  }

  V norm(V x, const std::string& prefix) {
    V sc = param(prefix + ".scale"), off = param(prefix + ".offset");
    V out = t_->new_var(layer_norm(t_->val(x), t_->val(sc), t_->val(off)));
    t_->record("layer_norm", [t = t_, x, sc, off, out] {
      if (!t->has_grad(out)) return;
      Tensor<S> gx, gsc, goff;
      layer_norm_bwd(t->val(x), t->val(sc), t->grad(out), &gx, &gsc, &goff);
      t->acc(x, gx);
      t->acc(sc, gsc);
      t->acc(off, goff);
    });
    return out;
  }

  V geglu(V x) {
    V out = t_->new_var(fqfm::geglu(t_->val(x)));
    t_->record("geglu", [t = t_, x, out] {
      if (!t->has_grad(out)) return;
      t->acc(x, geglu_bwd(t->val(x), t->grad(out)));
    });
    return out;
  }

  V softmax_op(V x, int axis) {
    V out = t_->new_var(fqfm::softmax(t_->val(x), axis));
    t_->record("softmax", [t = t_, x, out, axis] {
      if (!t->has_grad(out)) return;
      t->acc(x, softmax_bwd(t->val(out), t->grad(out), axis));
    });
    return out;
  }

  V unfold(V x, std::int64_t patch) {
    V out = t_->new_var(unfold_patches(t_->val(x), patch));
    const Shape xs = t_->val(x).shape();
    t_->record("unfold_patches", [t = t_, x, out, xs, patch] {
      if (!t->has_grad(out)) return;
      t->acc(x, unfold_patches_bwd(t->grad(out), xs, patch));
    });
    return out;
  }

  V fold(V p, const Shape& target) {
    V out = t_->new_var(fold_patches(t_->val(p), target));
    const std::int64_t patch = t_->val(p).extent(3);
    t_->record("fold_patches", [t = t_, p, out, patch] {
      if (!t->has_grad(out)) return;
      t->acc(p, fold_patches_bwd(t->grad(out), patch));
    });
    return out;
  }

  CV fft2(V x) {
    CV out = t_->new_cvar(fqfm::fft2(t_->val(x)));
    t_->record("fft2", [t = t_, x, out] {
      if (!t->has_grad(out)) return;
      const CTensor<S>& g = t->cgrad(out);
      const std::int64_t h = g.extent(g.rank() - 2), w = g.extent(g.rank() - 1);
      CTensor<S> back = ifft2_c(g);
      Tensor<S> gx(g.shape());
      const S hw = static_cast<S>(h * w);
      for (std::int64_t i = 0; i < gx.size(); ++i) gx[i] = hw * back[i].real();
      t->acc(x, gx);
    });
    return out;
  }

  V ifft2(CV s) {
    V out = t_->new_var(fqfm::ifft2(t_->cval(s)));
    t_->record("ifft2", [t = t_, s, out] {
      if (!t->has_grad(out)) return;
      const Tensor<S>& g = t->grad(out);
      const std::int64_t h = g.extent(g.rank() - 2), w = g.extent(g.rank() - 1);
      CTensor<S> gc(g.shape());
      for (std::int64_t i = 0; i < g.size(); ++i) gc[i] = std::complex<S>(g[i], 0);
      CTensor<S> gs = fft2_c(gc);
      const S inv = static_cast<S>(1.0 / static_cast<double>(h * w));
      for (std::int64_t i = 0; i < gs.size(); ++i) gs[i] *= inv;
      t->acc(s, gs);
    });
    return out;
  }

  CV cmul_conj(CV a, CV b) {
    CV out = t_->new_cvar(fqfm::cmul_conj(t_->cval(a), t_->cval(b)));
    t_->record("cmul_conj", [t = t_, a, b, out] {
      if (!t->has_grad(out)) return;
      const CTensor<S>& g = t->cgrad(out);
      const CTensor<S>& av = t->cval(a);
      const CTensor<S>& bv = t->cval(b);
      CTensor<S> ga(g.shape()), gb(g.shape());
      for (std::int64_t i = 0; i < g.size(); ++i) {
        ga[i] = g[i] * bv[i];
        gb[i] = std::conj(g[i]) * av[i];
      }
      t->acc(a, ga);
      t->acc(b, gb);
    });
    return out;
  }

  CV spec_scale(CV s, const std::string& name) {
    V w = param(name);
    const Tensor<S>& wv = t_->val(w);
    const CTensor<S>& sv = t_->cval(s);
    FQFM_REQUIRE(sv.rank() == 5 && wv.rank() == 3 && sv.extent(2) == wv.extent(0) &&
                     sv.extent(3) == wv.extent(1) && sv.extent(4) == wv.extent(2),
                 "spec_scale: weight ", shape_str(wv.shape()), " does not broadcast over ",
                 shape_str(sv.shape()));
    CTensor<S> y(sv.shape());
    const std::int64_t reps = sv.extent(0) * sv.extent(1), n = wv.size();
    for (std::int64_t r = 0; r < reps; ++r)
      for (std::int64_t i = 0; i < n; ++i) y[r * n + i] = sv[r * n + i] * wv[i];
    instrument::add_flops(2 * sv.size());
    CV out = t_->new_cvar(std::move(y));
    t_->record("spec_scale", [t = t_, s, w, out, reps, n] {
      if (!t->has_grad(out)) return;
      const CTensor<S>& g = t->cgrad(out);
      const CTensor<S>& svv = t->cval(s);
      const Tensor<S>& wvv = t->val(w);
      CTensor<S> gs(svv.shape());
      Tensor<S> gw(wvv.shape());
      for (std::int64_t r = 0; r < reps; ++r)
        for (std::int64_t i = 0; i < n; ++i) {
          gs[r * n + i] = g[r * n + i] * wvv[i];
          gw[i] += (g[r * n + i] * std::conj(svv[r * n + i])).real();
        }
      t->acc(s, gs);
      t->acc(w, gw);
    });
    return out;
  }

  V mul(V a, V b) {
    V out = t_->new_var(fqfm::mul(t_->val(a), t_->val(b)));
    t_->record("mul", [t = t_, a, b, out] {
      if (!t->has_grad(out)) return;
      t->acc(a, fqfm::mul(t->grad(out), t->val(b)));
      t->acc(b, fqfm::mul(t->grad(out), t->val(a)));
    });
    return out;
  }

  V add(V a, V b) {
    V out = t_->new_var(fqfm::add(t_->val(a), t_->val(b)));
    t_->record("add", [t = t_, a, b, out] {
      if (!t->has_grad(out)) return;
      t->acc(a, t->grad(out));
      t->acc(b, t->grad(out));
    });
    return out;
  }

  V sub(V a, V b) {
    V out = t_->new_var(fqfm::sub(t_->val(a), t_->val(b)));
    t_->record("sub", [t = t_, a, b, out] {
      if (!t->has_grad(out)) return;
      t->acc(a, t->grad(out));
      t->acc(b, scale(t->grad(out), S(-1)));
    });
    return out;
  }

  V scale_by(V a, S c) {
    V out = t_->new_var(fqfm::scale(t_->val(a), c));
    t_->record("scale", [t = t_, a, c, out] {
      if (!t->has_grad(out)) return;
      t->acc(a, fqfm::scale(t->grad(out), c));
    });
    return out;
  }

  V add_scaled(V a, V b, S c) {
    V out = t_->new_var(fqfm::add_scaled(t_->val(a), t_->val(b), c));
    t_->record("add_scaled", [t = t_, a, b, c, out] {
      if (!t->has_grad(out)) return;
      t->acc(a, t->grad(out));
      t->acc(b, fqfm::scale(t->grad(out), c));
    });
    return out;
  }

  V slice_ch(V x, std::int64_t c0, std::int64_t c1) {
    V out = t_->new_var(slice_channels(t_->val(x), c0, c1));
    t_->record("slice_channels", [t = t_, x, out, c0, c1] {
      if (!t->has_grad(out)) return;
      const Tensor<S>& g = t->grad(out);
      const Shape& xs = t->val(x).shape();
      Tensor<S> gx(xs);
      const std::int64_t B = xs[0], C = xs[1], HW = xs[2] * xs[3];
      for (std::int64_t b = 0; b < B; ++b)
        for (std::int64_t c = c0; c < c1; ++c)
          std::copy_n(g.data() + (b * (c1 - c0) + (c - c0)) * HW, HW,
                      gx.data() + (b * C + c) * HW);
      t->acc(x, gx);
    });
    return out;
  }

  V concat_ch(V a, V b) {
    V out = t_->new_var(concat_channels(t_->val(a), t_->val(b)));
    t_->record("concat_channels", [t = t_, a, b, out] {
      if (!t->has_grad(out)) return;
      const Tensor<S>& g = t->grad(out);
      const std::int64_t Ca = t->val(a).extent(1), Cb = t->val(b).extent(1);
      t->acc(a, slice_channels(g, 0, Ca));
      t->acc(b, slice_channels(g, Ca, Ca + Cb));
    });
    return out;
  }

  V s2d(V x) {
    V out = t_->new_var(space_to_depth(t_->val(x)));
    t_->record("space_to_depth", [t = t_, x, out] {
      if (!t->has_grad(out)) return;
      t->acc(x, depth_to_space(t->grad(out)));
    });
    return out;
  }

  V d2s(V x) {
    V out = t_->new_var(depth_to_space(t_->val(x)));
    t_->record("depth_to_space", [t = t_, x, out] {
      if (!t->has_grad(out)) return;
      t->acc(x, space_to_depth(t->grad(out)));
    });
    return out;
  }

  V pad_mirror(V x, std::int64_t ph, std::int64_t pw) {
    V out = t_->new_var(mirror_pad_hw(t_->val(x), ph, pw));
    const std::int64_t H = t_->val(x).extent(2), W = t_->val(x).extent(3);
    t_->record("mirror_pad_hw", [t = t_, x, out, H, W] {
      if (!t->has_grad(out)) return;
      t->acc(x, mirror_pad_hw_bwd(t->grad(out), H, W));
    });
    return out;
  }

  V crop(V x, std::int64_t h, std::int64_t w) {
    V out = t_->new_var(crop_hw(t_->val(x), h, w));
    const std::int64_t H = t_->val(x).extent(2), W = t_->val(x).extent(3);
    t_->record("crop_hw", [t = t_, x, out, H, W] {
      if (!t->has_grad(out)) return;
      t->acc(x, zero_pad_hw(t->grad(out), H, W));
    });
    return out;
  }

  V zero_pad(V x, std::int64_t h2, std::int64_t w2) {
    V out = t_->new_var(zero_pad_hw(t_->val(x), h2, w2));
    const std::int64_t H = t_->val(x).extent(2), W = t_->val(x).extent(3);
    t_->record("zero_pad_hw", [t = t_, x, out, H, W] {
      if (!t->has_grad(out)) return;
      t->acc(x, crop_hw(t->grad(out), H, W));
    });
    return out;
  }

  // mean |a - b|; the subgradient at ties is 0.
  V l1_mean(V a, V b) {
    const Tensor<S>& av = t_->val(a);
    const Tensor<S>& bv = t_->val(b);
    Tensor<S> loss({1});
    loss[0] = static_cast<S>(fqfm::l1_mean(av, bv));
    V out = t_->new_var(std::move(loss));
    t_->record("l1_mean", [t = t_, a, b, out] {
      if (!t->has_grad(out)) return;
      const S g = t->grad(out)[0];
      const Tensor<S>& avv = t->val(a);
      const Tensor<S>& bvv = t->val(b);
      const S invn = static_cast<S>(1.0 / static_cast<double>(avv.size()));
      Tensor<S> ga(avv.shape());
      for (std::int64_t i = 0; i < avv.size(); ++i) {
        const S d = avv[i] - bvv[i];
        ga[i] = (d > S(0) ? g : d < S(0) ? -g : S(0)) * invn;
      }
      t->acc(a, ga);
      t->acc(b, fqfm::scale(ga, S(-1)));
    });
    return out;
  }

  // mean |s| over all spectrum entries; adjoint vanishes at exact zeros.
  V spec_abs_mean(CV s) {
    Tensor<S> loss({1});
    loss[0] = static_cast<S>(spec_abs_mean_value(t_->cval(s)));
    V out = t_->new_var(std::move(loss));
    t_->record("spec_abs_mean", [t = t_, s, out] {
      if (!t->has_grad(out)) return;
      const S g = t->grad(out)[0];
      const CTensor<S>& svv = t->cval(s);
      const double invn = 1.0 / static_cast<double>(svv.size());
      CTensor<S> gs(svv.shape());
      for (std::int64_t i = 0; i < svv.size(); ++i) {
        const double m = std::abs(std::complex<double>(svv[i]));
        gs[i] = m > 0 ? std::complex<S>(std::complex<double>(svv[i]) *
                                        (static_cast<double>(g) * invn / m))
                      : std::complex<S>(0, 0);
      }
      t->acc(s, gs);
    });
    return out;
  }

  V sum_all(V x) {
    Tensor<S> s({1});
    s[0] = static_cast<S>(sum_all_value(t_->val(x)));
    V out = t_->new_var(std::move(s));
    t_->record("sum_all", [t = t_, x, out] {
      if (!t->has_grad(out)) return;
      t->acc(x, Tensor<S>::full(t->val(x).shape(), t->grad(out)[0]));
    });
    return out;
  }

  void note(const std::string&, const V&) {}

 private:
  Tape<S>* t_;
  const ParameterStore<S>* ps_;
  std::map<std::string, typename Tape<S>::Var> param_vars_;
};

/// Record loss_fn(exec) once, run backward, return per-parameter gradients.
template <class S, class F>
std::map<std::string, Tensor<S>> grad(F&& loss_fn, const ParameterStore<S>& ps) {
  Tape<S> tape;
  TapedExec<S> e(tape, ps);
  typename Tape<S>::Var loss = loss_fn(e);
  tape.backward(loss);
  return e.param_grads();
}

struct GradCheckEntry {
  std::string name;
  double max_rel_err = 0;
  std::int64_t checked = 0;
};

struct GradCheckReport {
  std::vector<GradCheckEntry> entries;
  double max_rel_err = 0;
  bool pass(double tol) const { return max_rel_err <= tol; }
};

/// Central finite differences vs tape gradients for every parameter.
/// `stride` subsamples elements of large parameters (1 checks everything).
/// `corrupt_adjoint` negates the analytic gradients to prove the checker can
/// fail.
template <class F>
GradCheckReport finite_diff_check(F&& loss_fn, ParameterStore<double>& ps, double h = 1e-5,
                                  std::int64_t stride = 1, bool corrupt_adjoint = false) {
  std::map<std::string, Tensor<double>> analytic = grad(loss_fn, ps);
  if (corrupt_adjoint)
    for (auto& [name, g] : analytic)
      for (std::int64_t i = 0; i < g.size(); ++i) g[i] = -g[i];

  auto eval = [&]() {
    PlainExec<double> e(ps);
    return loss_fn(e)[0];
  };

  GradCheckReport report;
  for (auto& [name, p] : ps) {
    GradCheckEntry entry{name, 0.0, 0};
    const Tensor<double>& ga = analytic.at(name);
    for (std::int64_t i = 0; i < p.size(); i += stride) {
      const double keep = p[i];
      p[i] = keep + h;
      const double fp = eval();
      p[i] = keep - h;
      const double fm = eval();
      p[i] = keep;
      const double gn = (fp - fm) / (2 * h);
      entry.max_rel_err = std::max(entry.max_rel_err, rel_err(ga[i], gn));
      ++entry.checked;
    }
    report.max_rel_err = std::max(report.max_rel_err, entry.max_rel_err);
    report.entries.push_back(std::move(entry));
  }
  return report;
}

}  // namespace fqfm
