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
#include <limits>

#include "omnisr/evalkit.hpp"
#include "omnisr/training.hpp"
#include "verify/synthetic.hpp"

using namespace omnisr;

namespace {

/// Gives every parameter the gradient `g` through a recorded dot product.
void set_gradients(TrainState& s, float g) {
  Tape<float> tape;
  TapeScope<float> scope(tape);
  Tensor<float> total;
  for (auto& [name, p] : s.params) {
    p.zero_grad();
    auto term = sum(mul(p, Tensor<float>(p.shape(), g)));
    total = total.defined() ? add(total, term) : term;
  }
  backward(total);
}

TrainState scalar_state(float theta) {
  TrainState s;
  s.params.emplace("w", Tensor<float>(Shape{1}, theta).set_requires_grad());
  s.m.emplace("w", Tensor<float>(Shape{1}));
  s.v.emplace("w", Tensor<float>(Shape{1}));
  return s;
}

}  // namespace

TEST_CASE("learning-rate schedule") {
  const TrainConfig cfg;
  CHECK(lr_at(0, cfg) == 5e-4);
  CHECK(lr_at(199999, cfg) == 5e-4);
  CHECK(lr_at(200000, cfg) == 2.5e-4);
  CHECK(lr_at(400000, cfg) == 1.25e-4);
}

TEST_CASE("L1 loss values and gradient") {
  const Tensor<float> a(Shape{2, 3}, 0.25f);
  CHECK(l1_loss(a, a).item() == 0.0f);
  CHECK(l1_loss(add_scalar(a, 0.5f), a).item() == doctest::Approx(0.5f));

  Tensor<float> pred(Shape{4}, {0.1f, 0.5f, 0.9f, 0.3f});
  const Tensor<float> target(Shape{4}, {0.2f, 0.5f, 0.4f, 0.0f});
  pred.set_requires_grad();
  {
    Tape<float> tape;
    TapeScope<float> scope(tape);
    backward(l1_loss(pred, target));
  }
  const float want[4] = {-0.25f, 0.0f, 0.25f, 0.25f};
  for (int i = 0; i < 4; ++i) CHECK(pred.grad()[static_cast<std::size_t>(i)] == want[i]);
}

TEST_CASE("AdamW: zero gradient, no decay leaves parameters alone") {
  TrainConfig cfg;
  cfg.weight_decay = 0.0;
  auto s = scalar_state(0.7f);
  set_gradients(s, 0.0f);
  adamw_step(s, 1e-3, cfg);
  CHECK(s.params.at("w")[0] == 0.7f);
  CHECK(s.iteration == 1);
}

TEST_CASE("AdamW: zero gradient applies decoupled decay exactly") {
  TrainConfig cfg;
  cfg.weight_decay = 0.1;
  auto s = scalar_state(0.7f);
  set_gradients(s, 0.0f);
  adamw_step(s, 1e-2, cfg);
  CHECK(s.params.at("w")[0] == static_cast<float>(static_cast<double>(0.7f) * (1.0 - 1e-2 * 0.1)));
}

TEST_CASE("AdamW: first step with unit gradient") {
  TrainConfig cfg;
  cfg.weight_decay = 0.0;
  auto s = scalar_state(1.0f);
  set_gradients(s, 1.0f);
  adamw_step(s, 1e-3, cfg);
  // m_hat = v_hat = 1 after bias correction.
  const double want = 1.0 - 1e-3 * 1.0 / (1.0 + cfg.eps);
  CHECK(s.params.at("w")[0] == static_cast<float>(want));
  CHECK(s.m.at("w")[0] == doctest::Approx(0.1));
  CHECK(s.v.at("w")[0] == doctest::Approx(0.001));
}

TEST_CASE("AdamW refuses non-finite gradients and leaves state untouched") {
  const TrainConfig cfg;
  auto s = scalar_state(0.5f);
  set_gradients(s, std::numeric_limits<float>::quiet_NaN());
  CHECK_THROWS_AS(adamw_step(s, 1e-3, cfg), NumericError);
  CHECK(s.params.at("w")[0] == 0.5f);
  CHECK(s.m.at("w")[0] == 0.0f);
  CHECK(s.iteration == 0);
}

TEST_CASE("flip is an involution, four quarter turns are the identity") {
  const auto img = verify::synthetic_image(1, 9, 9);
  CHECK(same_values(flip_horizontal(flip_horizontal(img)), img));
  Image r = img;
  for (int i = 0; i < 4; ++i) r = rotate90(r, 1);
  CHECK(same_values(r, img));
}

TEST_CASE("sampled crops are aligned and share the augmentation") {
  Dataset data(4);
  data.add("a", verify::synthetic_image(2, 320, 288), 64);
  data.add("b", verify::synthetic_image(3, 288, 320), 64);
  TrainConfig cfg;
  cfg.batch_size = 6;
  cfg.crop = 64;
  SplitMix64 rng(9);
  std::vector<CropRecord> records;
  const auto batch = sample_batch(data, cfg, rng, &records);
  CHECK(batch.lr.shape() == Shape{6, 3, 64, 64});
  CHECK(batch.hr.shape() == Shape{6, 3, 256, 256});
  REQUIRE(records.size() == 6);
  for (std::size_t k = 0; k < records.size(); ++k) {
    const auto& r = records[k];
    const auto& pair = data[r.image];
    const auto hr = apply_augment(crop_region(pair.hr, 4 * r.lr_y, 4 * r.lr_x, 256, 256), r.augment);
    const auto lr = apply_augment(crop_region(pair.lr, r.lr_y, r.lr_x, 64, 64), r.augment);
    const std::int64_t hn = hr.numel(), ln = lr.numel();
    bool hr_ok = true, lr_ok = true;
    for (std::int64_t i = 0; i < hn; ++i) hr_ok = hr_ok && batch.hr[static_cast<std::int64_t>(k) * hn + i] == hr[i];
    for (std::int64_t i = 0; i < ln; ++i) lr_ok = lr_ok && batch.lr[static_cast<std::int64_t>(k) * ln + i] == lr[i];
    CHECK(hr_ok);
    CHECK(lr_ok);
  }
  SplitMix64 again(9);
  const auto replay = sample_batch(data, cfg, again);
  CHECK(same_values(replay.lr, batch.lr));
  CHECK(again.state() == rng.state());
}

TEST_CASE("augmentation frequencies over 10k draws") {
  SplitMix64 rng(2024);
  int flips = 0, turns[4] = {0, 0, 0, 0};
  constexpr int kDraws = 10000;
  for (int i = 0; i < kDraws; ++i) {
    const auto a = draw_augment(AugmentLaw::flip_rotate, rng);
    flips += a.flip;
    ++turns[a.quarter_turns];
  }
  CHECK(flips / double(kDraws) >= 0.48);
  CHECK(flips / double(kDraws) <= 0.52);
  CHECK(turns[2] == 0);
  for (int q : {1, 3}) {
    CHECK(turns[q] / double(kDraws) >= 0.23);
    CHECK(turns[q] / double(kDraws) <= 0.27);
  }
  const auto none = draw_augment(AugmentLaw::none, rng);
  CHECK_FALSE(none.flip);
  CHECK(none.quarter_turns == 0);
}

TEST_CASE("skip-dominant start is within 2x of the bicubic L1") {
  NetworkConfig net;
  net.osag_count = 1;
  net.block.channels = 16;
  net.block.heads = 2;
  net.scale = 4;
  Dataset data(4);
  for (int i = 0; i < 4; ++i) data.add(std::to_string(i), verify::synthetic_image(40 + i, 128, 128), 16);
  TrainConfig cfg;
  cfg.batch_size = 8;
  cfg.crop = 16;
  SplitMix64 rng(1);
  const auto batch = sample_batch(data, cfg, rng);
  const auto params = init_params<float>(net);
  const NoGradScope<float> no_grad;
  const double model = l1_loss(forward(batch.lr, params, net), batch.hr).item();
  double bic = 0.0;
  for (std::int64_t k = 0; k < 8; ++k) {
    Image lr(Shape{3, 16, 16}), hr(Shape{3, 64, 64});
    for (std::int64_t i = 0; i < lr.numel(); ++i) lr[i] = batch.lr[k * lr.numel() + i];
    for (std::int64_t i = 0; i < hr.numel(); ++i) hr[i] = batch.hr[k * hr.numel() + i];
    bic += l1_loss(bicubic_resize(lr, 64, 64), hr).item() / 8.0;
  }
  CHECK(model <= 2.0 * bic);
}

TEST_CASE("invalid training settings are rejected") {
  TrainConfig cfg;
  cfg.batch_size = 0;
  CHECK_THROWS_AS(cfg.validate(8), ConfigError);
  TrainConfig crop;
  crop.crop = 4;
  CHECK_THROWS_AS(crop.validate(8), ConfigError);
}
