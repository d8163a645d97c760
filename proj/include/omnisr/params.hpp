// Copyright 2026 The OmniSR Toolkit Authors.
//
//    Licensed under the Apache License, Version 2.0 (the "License");
//    you may not use this file except in compliance with the License.
//    You may obtain a copy of the License at
//
//         http://www.apache.org/licenses/LICENSE-2.0
//
//    Unless required by applicable law or agreed to in writing, software
//    distributed under the License is distributed on an "AS IS" BASIS,
//    WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
//    See the License for the specific language governing permissions and
//    limitations under the License.

#pragma once

// Named parameter collections. A ParamLayout lists every trainable tensor
// (name, shape, initializer) without allocating; ModelParams holds the
// materialized tensors keyed by name, iterated in lexicographic order.

#include <cmath>
#include <cstdint>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "omnisr/tensor.hpp"

namespace omnisr {

enum class Init {
  zeros,
  ones,
  trunc_normal,     // N(0, 0.02^2) truncated to +-2 sigma
  kaiming_uniform,  // U(-1/sqrt(fan_in), 1/sqrt(fan_in))
};

struct ParamSpec {
  std::string name;
  Shape shape;
  Init init = Init::zeros;
  std::int64_t fan_in = 1;
};

class ParamLayout {
 public:
  void add(std::string name, Shape shape, Init init, std::int64_t fan_in = 1) {
    for (const auto& s : specs_) {
      if (s.name == name) throw ConfigError("duplicate parameter name " + name);
    }
    specs_.push_back({std::move(name), std::move(shape), init, fan_in});
  }

  /// Conv weight [out, in/groups, k, k] (Kaiming) and zero bias [out].
  void add_conv(const std::string& prefix, std::int64_t in, std::int64_t out, std::int64_t k,
                std::int64_t groups = 1) {
    const std::int64_t fan_in = (in / groups) * k * k;
    add(prefix + ".w", Shape{out, in / groups, k, k}, Init::kaiming_uniform, fan_in);
    add(prefix + ".b", Shape{out}, Init::zeros);
  }

  /// Row-vector projection weight [in, out] (truncated normal), zero bias.
  void add_linear(const std::string& prefix, std::int64_t in, std::int64_t out, const std::string& wname = "w",
                  const std::string& bname = "b") {
    add(prefix + "." + wname, Shape{in, out}, Init::trunc_normal, in);
    add(prefix + "." + bname, Shape{out}, Init::zeros);
  }

  void add_norm(const std::string& prefix, std::int64_t c) {
    add(prefix + ".gamma", Shape{c}, Init::ones);
    add(prefix + ".beta", Shape{c}, Init::zeros);
  }

  const std::vector<ParamSpec>& specs() const { return specs_; }

  std::int64_t total() const {
    std::int64_t n = 0;
    for (const auto& s : specs_) n += numel_of(s.shape);
    return n;
  }

  /// Scalar count of parameters whose name starts with `prefix`.
  std::int64_t total(std::string_view prefix) const {
    std::int64_t n = 0;
    for (const auto& s : specs_) {
      if (std::string_view(s.name).substr(0, prefix.size()) == prefix) n += numel_of(s.shape);
    }
    return n;
  }

 private:
  std::vector<ParamSpec> specs_;
};

template <typename Scalar>
using ModelParams = std::map<std::string, Tensor<Scalar>>;

/// SplitMix64; small, portable and fully specified, so initial weights are
/// identical on every platform for a given seed.
class SplitMix64 {
 public:
  explicit SplitMix64(std::uint64_t seed) : state_(seed) {}
  std::uint64_t state() const { return state_; }
  std::uint64_t next() {
    std::uint64_t z = (state_ += 0x9E3779B97F4A7C15ULL);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }
  /// Uniform in [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }
  double normal() {
    // Box-Muller; one of the pair is discarded to keep the stream stateless.
    double u1 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
  }

 private:
  std::uint64_t state_;
};

inline std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : s) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  return h;
}

/// Allocates and initializes every parameter of `layout`. Each tensor draws
/// from its own stream seeded by (seed, name), so adding or removing a
/// parameter never perturbs the others.
template <typename Scalar>
ModelParams<Scalar> materialize(const ParamLayout& layout, std::uint64_t seed) {
  ModelParams<Scalar> params;
  for (const auto& spec : layout.specs()) {
    SplitMix64 rng(seed ^ fnv1a(spec.name));
    Tensor<Scalar> t(spec.shape);
    switch (spec.init) {
      case Init::zeros:
        break;
      case Init::ones:
        for (auto& v : t.values()) v = Scalar(1);
        break;
      case Init::trunc_normal:
        for (auto& v : t.values()) {
          double z = rng.normal();
          while (std::abs(z) > 2.0) z = rng.normal();
          v = static_cast<Scalar>(0.02 * z);
        }
        break;
      case Init::kaiming_uniform: {
        const double bound = 1.0 / std::sqrt(static_cast<double>(spec.fan_in));
        for (auto& v : t.values()) v = static_cast<Scalar>((2.0 * rng.uniform() - 1.0) * bound);
        break;
      }
    }
    t.set_requires_grad();
    params.emplace(spec.name, std::move(t));
  }
  return params;
}

template <typename Scalar>
std::int64_t count_scalars(const ModelParams<Scalar>& params) {
  std::int64_t n = 0;
  for (const auto& [name, t] : params) n += t.numel();
  return n;
}

/// Read-only view of the parameters under a dotted prefix.
template <typename Scalar>
class ParamScope {
 public:
  ParamScope(const ModelParams<Scalar>& params, std::string prefix)
      : params_(&params), prefix_(std::move(prefix)) {}

  ParamScope sub(const std::string& name) const { return ParamScope(*params_, join(name)); }

  const Tensor<Scalar>& operator[](const std::string& name) const {
    const auto key = join(name);
    auto it = params_->find(key);
    if (it == params_->end()) throw ConfigError("missing parameter " + key);
    return it->second;
  }

  bool contains(const std::string& name) const { return params_->count(join(name)) != 0; }
  const std::string& prefix() const { return prefix_; }

 private:
  std::string join(const std::string& name) const { return prefix_.empty() ? name : prefix_ + "." + name; }

  const ModelParams<Scalar>* params_;
  std::string prefix_;
};

/// Deep copy of a parameter set converted to another scalar type, with
/// gradients enabled (used for the 64-bit shadow path).
template <typename To, typename From>
ModelParams<To> cast_params(const ModelParams<From>& params) {
  ModelParams<To> out;
  for (const auto& [name, t] : params) {
    auto c = t.template cast<To>();
    c.set_requires_grad();
    out.emplace(name, std::move(c));
  }
  return out;
}

}  // namespace omnisr
