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
#include <filesystem>

#include "omnisr/evalkit.hpp"
#include "omnisr/file_io.hpp"
#include "omnisr/png_io.hpp"
#include "verify/synthetic.hpp"

using namespace omnisr;

namespace fs = std::filesystem;

TEST_CASE("luma conversion examples") {
  Image px(Shape{3, 1, 3});
  const float rgb[3][3] = {{0, 0, 0}, {1, 1, 1}, {1, 0, 0}};
  for (int k = 0; k < 3; ++k) {
    for (int c = 0; c < 3; ++c) px[c * 3 + k] = rgb[k][c];
  }
  const auto y = rgb_to_y(px);
  CHECK(y.shape() == Shape{1, 1, 3});
  CHECK(y[0] == doctest::Approx(16.0 / 255.0));
  CHECK(y[1] == doctest::Approx(235.0 / 255.0));
  CHECK(y[2] == doctest::Approx(0.31953).epsilon(1e-4));
}

TEST_CASE("PSNR sentinel and 0 dB case") {
  const auto a = verify::synthetic_image(1, 16, 16);
  CHECK(std::isinf(psnr(a, a, 2)));
  CHECK(psnr(Image(Shape{1, 8, 8}, 0.0f), Image(Shape{1, 8, 8}, 1.0f), 0) == 0.0);
}

TEST_CASE("SSIM identity and anti-correlation") {
  const auto a = verify::synthetic_image(2, 24, 24);
  CHECK(ssim(a, a, 0) == 1.0);
  Image bin(Shape{1, 24, 24}), inv(Shape{1, 24, 24});
  SplitMix64 rng(3);
  for (std::int64_t i = 0; i < bin.numel(); ++i) {
    bin[i] = static_cast<float>(rng.next() & 1);
    inv[i] = 1.0f - bin[i];
  }
  CHECK(ssim(bin, inv, 0) < 0.0);
}

TEST_CASE("shape mismatches are rejected") {
  CHECK_THROWS_AS(psnr(Image(Shape{1, 8, 8}), Image(Shape{1, 8, 9}), 0), ShapeError);
  CHECK_THROWS_AS(ssim(Image(Shape{1, 8, 8}), Image(Shape{1, 8, 8}), 4), ShapeError);
}

TEST_CASE("feature entropy closed forms") {
  Tensor<float> uniform(Shape{64, 1});
  for (int i = 0; i < 64; ++i) uniform[i] = static_cast<float>(i);
  CHECK(feature_entropy(uniform) == doctest::Approx(1.0));
  CHECK(feature_entropy(Tensor<float>(Shape{10, 3}, 2.0f)) == 0.0);
  Tensor<float> two(Shape{10, 1});
  for (int i = 0; i < 10; ++i) two[i] = static_cast<float>(i % 2);
  CHECK(feature_entropy(two) == doctest::Approx(1.0 / 6.0));
}

TEST_CASE("tiling a local upscaler reproduces the whole-image result") {
  const auto lr = verify::synthetic_image(4, 50, 37);
  auto nearest = [](const Image& t) {
    const Tensor<float> x = reshape(t, Shape{1, t.dim(0), t.dim(1), t.dim(2)});
    const auto y = resize_nearest(x, 2 * t.dim(1), 2 * t.dim(2));
    return reshape(y, Shape{y.dim(1), y.dim(2), y.dim(3)});
  };
  const auto tiled = tiled_upscale(nearest, lr, 2, 16, 4);
  const auto whole = nearest(lr);
  REQUIRE(tiled.shape() == whole.shape());
  double err = 0.0;
  for (std::int64_t i = 0; i < whole.numel(); ++i) err = std::max(err, std::abs(double(tiled[i]) - whole[i]));
  CHECK(err < 1e-6);
}

TEST_CASE("benchmark: passthrough, bicubic baseline and aggregates") {
  std::vector<std::pair<std::string, Image>> set;
  for (int i = 0; i < 3; ++i) set.emplace_back("img" + std::to_string(i), verify::synthetic_image(10 + i, 30 + 4 * i, 41));
  const SrModel truth = [](const Image&, const Image& hr) { return hr; };
  const auto perfect = run_benchmark(truth, set, 3);
  REQUIRE(perfect.images.size() == 3);
  for (const auto& r : perfect.images) {
    CHECK(std::isinf(r.psnr));
    CHECK(r.ssim == 1.0);
  }
  const auto a = run_benchmark(bicubic_model(3), set, 3), b = run_benchmark(bicubic_model(3), set, 3);
  double mean = 0.0;
  for (std::size_t i = 0; i < a.images.size(); ++i) {
    CHECK(std::isfinite(a.images[i].psnr));
    CHECK(a.images[i].psnr == b.images[i].psnr);
    mean += a.images[i].psnr / 3.0;
  }
  CHECK(a.mean_psnr() == doctest::Approx(mean).epsilon(1e-12));
  CHECK(a.to_text().find("img1") != std::string::npos);
}

TEST_CASE("benchmark directory run records unreadable images and continues") {
  const auto dir = fs::temp_directory_path() / "omnisr_bench_test";
  fs::remove_all(dir);
  fs::create_directories(dir);
  png_write((dir / "good.png").string(), verify::synthetic_image(5, 32, 32));
  write_file_atomic((dir / "bad.png").string(), "not a png");
  const auto report = run_benchmark(bicubic_model(2), dir.string(), 2);
  CHECK(report.images.size() == 1);
  REQUIRE(report.failures.size() == 1);
  CHECK(report.failures[0].name.find("bad") != std::string::npos);
  fs::remove_all(dir);
}

TEST_CASE("ablation variants") {
  NetworkConfig base;
  CHECK(ablation_variant(AttentionKind::omni, base) == base);
  for (auto kind : {AttentionKind::spatial_only, AttentionKind::channel_only, AttentionKind::se_hybrid}) {
    const auto v = ablation_variant(kind, base);
    CHECK(v.block.attention == kind);
    CHECK(std::abs(double(count_params(v)) / double(count_params(base)) - 1.0) <= 0.05);
  }
  // Same weights, same input: omni variant and default network agree bit for bit.
  NetworkConfig small;
  small.osag_count = 1;
  small.block.channels = 8;
  small.block.heads = 2;
  small.block.window = 4;
  small.scale = 2;
  const auto params = init_params<float>(small);
  Tensor<float> x(Shape{1, 3, 8, 8});
  SplitMix64 rng(1);
  for (auto& v : x.values()) v = static_cast<float>(rng.uniform());
  CHECK(same_values(forward(x, params, ablation_variant(AttentionKind::omni, small)), forward(x, params, small)));
}

TEST_CASE("channel-only attention skips the spatial stage") {
  SplitMix64 rng(8);
  AttentionParams<double> p;
  p.heads = 2;
  auto randn = [&](const Shape& s) {
    Tensor<double> t(s);
    for (auto& v : t.values()) v = rng.normal();
    return t;
  };
  for (auto* w : {&p.wq, &p.wk, &p.wv, &p.wout}) *w = randn({4, 4});
  for (auto* b : {&p.bq, &p.bk, &p.bv, &p.bout}) *b = randn({4});
  p.log_tau = randn({2});
  const auto x = randn({1, 5, 4});
  const auto q = linear(x, p.wq, p.bq), k = linear(x, p.wk, p.bk), v = linear(x, p.wv, p.bv);
  const auto want = linear(channel_attention(q, k, v, 2, p.log_tau), p.wout, p.bout);
  const auto got = omni_self_attention(x, p, AttentionKind::channel_only);
  for (std::int64_t i = 0; i < want.numel(); ++i) CHECK(got[i] == want[i]);
  const auto sp = omni_self_attention(x, p, AttentionKind::spatial_only);
  const auto want_sp = linear(spatial_attention(q, k, v, 2), p.wout, p.bout);
  for (std::int64_t i = 0; i < want.numel(); ++i) CHECK(sp[i] == want_sp[i]);
}
