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

#include <map>
#include <string>

#include "fqfm/ops.hpp"

namespace fqfm {

/// Ordered name -> tensor map. Ordering fixes checkpoint layout and the
/// parameter traversal order of the optimizer.
template <class S>
class ParameterStore {
 public:
  Tensor<S>& at(const std::string& name) {
    auto it = params_.find(name);
    FQFM_REQUIRE(it != params_.end(), "unknown parameter: ", name);
    return it->second;
  }
  const Tensor<S>& at(const std::string& name) const {
    auto it = params_.find(name);
    FQFM_REQUIRE(it != params_.end(), "unknown parameter: ", name);
    return it->second;
  }

  void put(const std::string& name, Tensor<S> t) {
    FQFM_REQUIRE(!params_.count(name), "duplicate parameter: ", name);
    params_.emplace(name, std::move(t));
  }

  bool has(const std::string& name) const { return params_.count(name) != 0; }
  std::size_t count() const { return params_.size(); }

  std::int64_t total_scalars() const {
    std::int64_t n = 0;
    for (const auto& [k, v] : params_) n += v.size();
    return n;
  }

  auto begin() { return params_.begin(); }
  auto end() { return params_.end(); }
  auto begin() const { return params_.begin(); }
  auto end() const { return params_.end(); }

 private:
  std::map<std::string, Tensor<S>> params_;
};

namespace init {

// All initializers draw from an RNG keyed by (seed, parameter name), and
// sample in double before casting, so 32- and 64-bit models start from the
// same point stream.

template <class S>
Tensor<S> uniform_fan_in(const Shape& shape, std::int64_t fan_in, std::uint64_t seed,
                         const std::string& name) {
  Rng rng(seed ^ fnv1a(name));
  const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
  Tensor<S> t(shape);
  for (std::int64_t i = 0; i < t.size(); ++i) t[i] = static_cast<S>(rng.uniform(-bound, bound));
  return t;
}

template <class S>
void conv_pointwise_params(ParameterStore<S>& ps, const std::string& prefix, std::int64_t cout,
                           std::int64_t cin, std::uint64_t seed) {
  ps.put(prefix + ".w", uniform_fan_in<S>({cout, cin, 1, 1}, cin, seed, prefix + ".w"));
  ps.put(prefix + ".b", Tensor<S>({cout}));
}

template <class S>
void conv_depthwise_params(ParameterStore<S>& ps, const std::string& prefix, std::int64_t c,
                           std::uint64_t seed) {
  ps.put(prefix + ".w", uniform_fan_in<S>({c, 1, 3, 3}, 9, seed, prefix + ".w"));
  ps.put(prefix + ".b", Tensor<S>({c}));
}

template <class S>
void conv_pointwise_zero(ParameterStore<S>& ps, const std::string& prefix, std::int64_t cout,
                         std::int64_t cin) {
  ps.put(prefix + ".w", Tensor<S>({cout, cin, 1, 1}));
  ps.put(prefix + ".b", Tensor<S>({cout}));
}

template <class S>
void norm_params(ParameterStore<S>& ps, const std::string& prefix, std::int64_t c) {
  ps.put(prefix + ".scale", Tensor<S>::full({c}, S(1)));
  ps.put(prefix + ".offset", Tensor<S>({c}));
}

}  // namespace init

template <class S>
ConvParams<S> conv_ref(const ParameterStore<S>& ps, const std::string& prefix) {
  return ConvParams<S>{ps.at(prefix + ".w"), ps.at(prefix + ".b")};
}

}  // namespace fqfm
