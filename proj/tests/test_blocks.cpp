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

#include "omnisr/flop_counter.hpp"
#include "omnisr/network.hpp"

using namespace omnisr;

namespace {

BlockConfig small_block(std::int64_t c = 8, std::int64_t window = 4) {
  BlockConfig b;
  b.channels = c;
  b.heads = 2;
  b.window = window;
  return b;
}

template <typename Declare>
ModelParams<float> make_params(Declare declare, std::uint64_t seed = 1) {
  ParamLayout layout;
  declare(layout);
  auto p = materialize<float>(layout, seed);
  // Push every tensor off its initializer so zero biases and unit norms do
  // not make the checks vacuous.
  SplitMix64 rng(seed + 100);
  for (auto& [name, t] : p) {
    for (auto& v : t.values()) v += static_cast<float>(0.1 * rng.normal());
  }
  return p;
}

void zero_prefix(ModelParams<float>& p, const std::string& prefix) {
  for (auto& [name, t] : p) {
    if (name.rfind(prefix, 0) == 0) {
      for (auto& v : t.values()) v = 0.0f;
    }
  }
}

Tensor<float> randn(const Shape& s, std::uint64_t seed) {
  SplitMix64 rng(seed);
  Tensor<float> t(s);
  for (auto& v : t.values()) v = static_cast<float>(rng.normal());
  return t;
}

double max_diff(const Tensor<float>& a, const Tensor<float>& b) {
  REQUIRE(a.shape() == b.shape());
  double m = 0.0;
  for (std::int64_t i = 0; i < a.numel(); ++i) m = std::max(m, std::abs(static_cast<double>(a[i]) - b[i]));
  return m;
}

}  // namespace

TEST_CASE("LCB with zero weights is the identity") {
  const auto cfg = small_block();
  auto p = make_params([&](ParamLayout& l) { declare_lcb(l, "lcb", cfg); });
  zero_prefix(p, "lcb");
  const auto x = randn({1, 8, 32, 32}, 2);
  CHECK(same_values(lcb_forward(x, ParamScope<float>(p, "lcb"), cfg), x));
}

TEST_CASE("SE with a zero expand layer halves its input") {
  auto p = make_params([](ParamLayout& l) { declare_se(l, "se", 6, 3); });
  zero_prefix(p, "se.expand");
  const auto x = randn({1, 6, 5, 7}, 4);
  const auto y = se_attention(x, ParamScope<float>(p, "se"));
  for (std::int64_t i = 0; i < x.numel(); ++i) CHECK(y[i] == 0.5f * x[i]);
}

TEST_CASE("spatial pooling of a constant map is exact") {
  Tensor<float> x(Shape{1, 2, 7, 9}, 0.3f);
  const auto m = mean_spatial(x);
  CHECK(m[0] == doctest::Approx(0.3f).epsilon(1e-7));
  CHECK(m[1] == doctest::Approx(0.3f).epsilon(1e-7));
}

TEST_CASE("OSA block: one window makes meso and global identical") {
  const auto cfg = small_block(8, 8);
  const auto p = make_params([&](ParamLayout& l) { declare_osa_block(l, "osa", cfg); });
  const ParamScope<float> s(p, "osa");
  const auto x = randn({1, 8, 8, 8}, 5);
  CHECK(same_values(osa_block_forward(x, PartitionMode::meso, s, cfg),
                    osa_block_forward(x, PartitionMode::global, s, cfg)));
}

TEST_CASE("OSA block pads and crops unaligned maps") {
  const auto cfg = small_block(8, 8);
  const auto p = make_params([&](ParamLayout& l) { declare_osa_block(l, "osa", cfg); });
  const auto x = randn({1, 8, 33, 33}, 6);
  for (auto mode : {PartitionMode::meso, PartitionMode::global}) {
    const auto y = osa_block_forward(x, mode, ParamScope<float>(p, "osa"), cfg);
    CHECK(y.shape() == x.shape());
    CHECK(all_finite(y));
  }
}

TEST_CASE("GDFN with a silent gate branch outputs the projection bias") {
  const auto cfg = small_block();
  auto p = make_params([&](ParamLayout& l) { declare_gdfn(l, "ffn", cfg); });
  zero_prefix(p, "ffn.project_in");
  zero_prefix(p, "ffn.dw.b");
  const auto y = gdfn_forward(randn({1, 8, 6, 6}, 7), ParamScope<float>(p, "ffn"));
  CHECK(y.shape() == Shape{1, 8, 6, 6});
  const auto& bias = p.at("ffn.project_out.b");
  for (std::int64_t c = 0; c < 8; ++c) {
    for (std::int64_t i = 0; i < 36; ++i) CHECK(y[c * 36 + i] == bias[c]);
  }
}

TEST_CASE("ESA with a zero expand layer halves its input") {
  const auto cfg = small_block(64);
  auto p = make_params([&](ParamLayout& l) { declare_esa(l, "esa", cfg); });
  zero_prefix(p, "esa.expand");
  const auto x = randn({1, 64, 48, 48}, 8);
  const auto y = esa_forward(x, ParamScope<float>(p, "esa"));
  REQUIRE(y.shape() == x.shape());
  for (std::int64_t i = 0; i < x.numel(); ++i) CHECK(y[i] == 0.5f * x[i]);
}

TEST_CASE("OSAG with silent residual branches is a fixed affine map") {
  const auto cfg = small_block();
  auto p = make_params([&](ParamLayout& l) { declare_osag(l, "g", cfg); });
  zero_prefix(p, "g.lcb");
  for (const char* blk : {"g.meso", "g.global"}) {
    zero_prefix(p, std::string(blk) + ".attn.wout");
    zero_prefix(p, std::string(blk) + ".attn.bout");
    zero_prefix(p, std::string(blk) + ".ffn.project_out");
  }
  zero_prefix(p, "g.esa.expand");
  const auto x = randn({1, 8, 16, 16}, 9);
  const auto y = osag_forward(x, ParamScope<float>(p, "g"), cfg);
  // Residual only: Conv(x + x) gated by sigmoid(0).
  const auto want = scale(conv2d(add(x, x), p.at("g.conv.w"), p.at("g.conv.b"), Conv2dOptions{1, 1, 1}), 0.5f);
  CHECK(max_diff(y, want) < 1e-6);
}

TEST_CASE("network output shape and skip-dominant start") {
  NetworkConfig cfg;
  cfg.osag_count = 1;
  cfg.block = small_block();
  cfg.scale = 4;
  const auto params = init_params<float>(cfg);
  const auto x = randn({1, 3, 64, 64}, 10);
  const auto y = forward(x, params, cfg);
  CHECK(y.shape() == Shape{1, 3, 256, 256});
  // Deep branch silent at init: the long skip alone upsamples by replication.
  CHECK(max_diff(y, resize_nearest(x, 256, 256)) < 1e-5);
}

TEST_CASE("network with a silent deep branch equals Rec(X0)") {
  NetworkConfig cfg;
  cfg.osag_count = 2;
  cfg.block = small_block();
  cfg.scale = 2;
  cfg.init = InitScheme::standard;
  auto params = init_params<float>(cfg);
  zero_prefix(params, "body_tail");
  const auto x = randn({1, 3, 12, 12}, 11);
  const auto x0 = conv2d(x, params.at("head.w"), params.at("head.b"), Conv2dOptions{1, 1, 1});
  const auto want =
      pixel_shuffle(conv2d(x0, params.at("recon.w"), params.at("recon.b"), Conv2dOptions{1, 1, 1}), 2);
  CHECK(same_values(forward(x, params, cfg), want));
}

TEST_CASE("parameter counts") {
  NetworkConfig cfg;  // published configuration
  const double published[3] = {772e3, 780e3, 792e3};
  for (int s = 2; s <= 4; ++s) {
    cfg.scale = s;
    CHECK(std::abs(count_params(cfg) / published[s - 2] - 1.0) <= 0.05);
  }
  ParamLayout one;
  declare_osag(one, "osag.0", cfg.block);
  NetworkConfig k1 = cfg;
  k1.osag_count = 1;
  CHECK(count_params(k1) == count_params(cfg) - 4 * one.total());
  NetworkConfig k0 = cfg;
  k0.osag_count = 0;
  CHECK_THROWS_AS(count_params(k0), ConfigError);
}

TEST_CASE("FLOP count: published figure and additivity") {
  NetworkConfig cfg;
  CHECK(std::abs(static_cast<double>(count_flops(cfg, 1280, 720)) / 36e9 - 1.0) <= 0.2);

  const auto x = randn({1, 4, 10, 7}, 12), x2 = randn({1, 4, 20, 7}, 13);
  const auto w = randn({5, 4, 3, 3}, 14), b = randn({5}, 15);
  std::uint64_t one = 0, two = 0;
  {
    const MacCountScope m;
    conv2d(x, w, b, Conv2dOptions{1, 1, 1});
    one = m.count();
  }
  {
    const MacCountScope m;
    conv2d(x2, w, b, Conv2dOptions{1, 1, 1});
    two = m.count();
  }
  CHECK(two == 2 * one);

  auto attention_macs = [](std::int64_t windows) {
    const Tensor<float> q(Shape{windows, 16, 8});
    const MacCountScope m;
    spatial_attention(q, q, q, 2);
    return m.count();
  };
  CHECK(attention_macs(6) == 3 * attention_macs(2));
}
