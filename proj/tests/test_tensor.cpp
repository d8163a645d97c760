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

#include <algorithm>
#include <cmath>

#include "omnisr/conv.hpp"
#include "omnisr/ops.hpp"
#include "omnisr/params.hpp"

using namespace omnisr;

namespace {

Tensor<float> iota(const Shape& s, float start = 0.0f) {
  Tensor<float> t(s);
  for (std::int64_t i = 0; i < t.numel(); ++i) t[i] = start + static_cast<float>(i);
  return t;
}

Tensor<double> random_d(const Shape& s, std::uint64_t seed) {
  SplitMix64 rng(seed);
  Tensor<double> t(s);
  for (auto& v : t.values()) v = rng.normal();
  return t;
}

}  // namespace

TEST_CASE("matmul identity and permutation") {
  const Tensor<float> eye(Shape{2, 2}, {1, 0, 0, 1});
  const Tensor<float> m(Shape{2, 2}, {1, 2, 3, 4});
  CHECK(same_values(matmul(eye, m), m));
  const Tensor<float> swap(Shape{2, 2}, {0, 1, 1, 0});
  CHECK(same_values(matmul(eye, swap), swap));
}

TEST_CASE("matmul shape errors name both shapes") {
  const Tensor<float> a(Shape{2, 3}), b(Shape{2, 3});
  CHECK_THROWS_AS(matmul(a, b), ShapeError);
  try {
    matmul(a, b);
  } catch (const ShapeError& e) {
    CHECK(std::string(e.what()).find("(2, 3)") != std::string::npos);
  }
}

TEST_CASE("softmax rows") {
  auto u = softmax_lastdim(Tensor<float>(Shape{1, 3}));
  for (int i = 0; i < 3; ++i) CHECK(u[i] == doctest::Approx(1.0 / 3.0));
  CHECK(softmax_lastdim(Tensor<float>(Shape{1, 1}, 5.0f))[0] == 1.0f);
  auto s = softmax_lastdim(Tensor<float>(Shape{1, 2}, {1000.0f, 0.0f}));
  CHECK(s[0] == 1.0f);
  CHECK(s[1] == 0.0f);
  CHECK(all_finite(s));
}

TEST_CASE("rotate is a transpose and rotate_inverse undoes it") {
  const auto x = iota({1, 64, 16});
  const auto r = rotate(x);
  CHECK(r.shape() == Shape{1, 16, 64});
  CHECK(r[3 * 64 + 5] == x[5 * 16 + 3]);
  CHECK(same_values(rotate_inverse(r), x));
}

TEST_CASE("conv2d delta kernel and scalar kernel") {
  const auto x = iota({1, 1, 5, 6});
  Tensor<float> delta(Shape{1, 1, 3, 3});
  delta[4] = 1.0f;
  CHECK(same_values(conv2d(x, delta, Tensor<float>(Shape{1}), Conv2dOptions{1, 1, 1}), x));
  const Tensor<float> two(Shape{1, 1, 1, 1}, 2.0f);
  const auto y = conv2d(x, two, Tensor<float>(Shape{1}), Conv2dOptions{});
  for (std::int64_t i = 0; i < x.numel(); ++i) CHECK(y[i] == 2.0f * x[i]);
}

TEST_CASE("layernorm constant and normalized rows") {
  const Tensor<float> g(Shape{2}, 1.0f), b(Shape{2}, 0.0f);
  const auto z = layernorm(Tensor<float>(Shape{1, 2}, 3.0f), g, b);
  CHECK(z[0] == 0.0f);
  CHECK(z[1] == 0.0f);
  const auto n = layernorm(Tensor<float>(Shape{1, 2}, {1.0f, -1.0f}), g, b);
  CHECK(n[0] == doctest::Approx(1.0).epsilon(1e-4));
  CHECK(n[1] == doctest::Approx(-1.0).epsilon(1e-4));
}

TEST_CASE("pixel_shuffle contract") {
  const auto x = iota({1, 48, 4, 4});
  const auto y = pixel_shuffle(x, 4);
  CHECK(y.shape() == Shape{1, 3, 16, 16});
  std::vector<float> a(x.values().begin(), x.values().end()), c(y.values().begin(), y.values().end());
  std::sort(a.begin(), a.end());
  std::sort(c.begin(), c.end());
  CHECK(a == c);
  CHECK(same_values(pixel_shuffle(x, 1), x));
  CHECK(pixel_shuffle(Tensor<float>(Shape{1, 48, 64, 64}), 4).shape() == Shape{1, 3, 256, 256});
}

TEST_CASE("backward of sum and sum of squares") {
  auto x = random_d({3, 4}, 1);
  x.set_requires_grad();
  {
    Tape<double> tape;
    TapeScope<double> scope(tape);
    backward(sum(x));
  }
  for (auto g : x.grad()) CHECK(g == 1.0);
  x.zero_grad();
  {
    Tape<double> tape;
    TapeScope<double> scope(tape);
    backward(sum(mul(x, x)));
  }
  for (std::int64_t i = 0; i < x.numel(); ++i) CHECK(x.grad()[static_cast<std::size_t>(i)] == doctest::Approx(2 * x[i]));
}

TEST_CASE("no gradient is recorded outside a tape") {
  auto x = random_d({2, 2}, 2);
  x.set_requires_grad();
  const auto y = sum(mul(x, x));
  CHECK_FALSE(y.requires_grad());
}
