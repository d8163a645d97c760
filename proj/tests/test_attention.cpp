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

#include <doctest.h>

#include <cmath>

#include "omnisr/attention.hpp"
#include "omnisr/params.hpp"

using namespace omnisr;

namespace {

Tensor<double> randn(const Shape& s, SplitMix64& rng) {
  Tensor<double> t(s);
  for (auto& v : t.values()) v = rng.normal();
  return t;
}

AttentionParams<double> random_params(std::int64_t c, int heads, SplitMix64& rng) {
  AttentionParams<double> p;
  p.heads = heads;
  for (auto* w : {&p.wq, &p.wk, &p.wv, &p.wout}) *w = randn({c, c}, rng);
  for (auto* b : {&p.bq, &p.bk, &p.bv, &p.bout}) *b = randn({c}, rng);
  p.log_tau = randn({heads}, rng);
  return p;
}

double max_diff(const Tensor<double>& a, const Tensor<double>& b) {
  double m = 0.0;
  for (std::int64_t i = 0; i < a.numel(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

}  // namespace

TEST_CASE("meso partition shapes") {
  const Tensor<float> x(Shape{16, 16, 4});
  CHECK(meso_partition(x, 8).shape() == Shape{4, 64, 4});
  CHECK(meso_partition(x, 16).shape() == Shape{1, 256, 4});
}

TEST_CASE("global partition degenerate grid") {
  const Tensor<float> x(Shape{8, 8, 2});
  CHECK(global_partition(x, 8).shape() == Shape{1, 64, 2});
}

TEST_CASE("spatial attention single token returns v") {
  SplitMix64 rng(1);
  const auto q = randn({2, 1, 4}, rng), k = randn({2, 1, 4}, rng), v = randn({2, 1, 4}, rng);
  CHECK(max_diff(spatial_attention(q, k, v, 2), v) < 1e-15);
}

TEST_CASE("spatial attention with identical keys averages values") {
  SplitMix64 rng(2);
  const auto q = randn({1, 5, 4}, rng), v = randn({1, 5, 4}, rng);
  auto k = randn({1, 1, 4}, rng);
  Tensor<double> kk(Shape{1, 5, 4});
  for (std::int64_t t = 0; t < 5; ++t) {
    for (int c = 0; c < 4; ++c) kk[t * 4 + c] = k[c];
  }
  const auto y = spatial_attention(q, kk, v, 1);
  for (int c = 0; c < 4; ++c) {
    double mean = 0.0;
    for (int t = 0; t < 5; ++t) mean += v[t * 4 + c] / 5.0;
    for (int t = 0; t < 5; ++t) CHECK(y[t * 4 + c] == doctest::Approx(mean).epsilon(1e-12));
  }
}

TEST_CASE("channel attention with one channel per head returns v") {
  SplitMix64 rng(3);
  const auto q = randn({1, 6, 1}, rng), k = randn({1, 6, 1}, rng), v = randn({1, 6, 1}, rng);
  CHECK(max_diff(channel_attention(q, k, v, 1, Tensor<double>(Shape{1})), v) < 1e-15);
}

TEST_CASE("channel attention is equivariant to token permutations") {
  SplitMix64 rng(4);
  const auto q = randn({1, 5, 4}, rng), k = randn({1, 5, 4}, rng), v = randn({1, 5, 4}, rng);
  const auto tau = randn({2}, rng);
  const int perm[5] = {3, 0, 4, 1, 2};
  auto permute_tokens = [&](const Tensor<double>& t) {
    Tensor<double> o(t.shape());
    for (int i = 0; i < 5; ++i) {
      for (int c = 0; c < 4; ++c) o[i * 4 + c] = t[perm[i] * 4 + c];
    }
    return o;
  };
  const auto y = channel_attention(q, k, v, 2, tau);
  const auto yp = channel_attention(permute_tokens(q), permute_tokens(k), permute_tokens(v), 2, tau);
  CHECK(max_diff(permute_tokens(y), yp) < 1e-12);
}

TEST_CASE("omni attention: zero input and zero biases give zero output") {
  SplitMix64 rng(5);
  auto p = random_params(4, 2, rng);
  for (auto* b : {&p.bq, &p.bk, &p.bv, &p.bout}) *b = Tensor<double>(Shape{4});
  const auto y = omni_self_attention(Tensor<double>(Shape{1, 6, 4}), p);
  for (auto v : y.values()) CHECK(v == 0.0);
}

TEST_CASE("omni attention on one token is channel attention of the projected token") {
  SplitMix64 rng(6);
  const auto p = random_params(4, 2, rng);
  const auto x = randn({1, 1, 4}, rng);
  const auto q = linear(x, p.wq, p.bq), k = linear(x, p.wk, p.bk), v = linear(x, p.wv, p.bv);
  const auto want = linear(channel_attention(q, k, v, 2, p.log_tau), p.wout, p.bout);
  CHECK(max_diff(omni_self_attention(x, p), want) < 1e-12);
}

TEST_CASE("head count must divide channels") {
  CHECK_THROWS_AS(spatial_attention(Tensor<double>(Shape{1, 2, 5}), Tensor<double>(Shape{1, 2, 5}),
                                    Tensor<double>(Shape{1, 2, 5}), 2),
                  ConfigError);
}
