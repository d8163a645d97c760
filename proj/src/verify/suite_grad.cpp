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

#include <cstdio>

#include "omnisr/network.hpp"
#include "omnisr/training.hpp"
#include "verify/gradcheck.hpp"
#include "verify/suites.hpp"

namespace omnisr::verify {

namespace {

using T = Tensor<double>;
using Inputs = std::vector<T>;

CheckResult to_check(const GradCheckResult& g, double tol) {
  char buf[160];
  std::snprintf(buf, sizeof(buf), "max rel err %.2e (tol %.0e) over %lld coords, %lld kinks skipped", g.max_rel_err,
                tol, static_cast<long long>(g.checked), static_cast<long long>(g.kinks));
  return {g.name, g.pass, buf};
}

/// Moves every entry at least `margin` away from zero, keeping its sign.
T away_from_zero(T t, double margin) {
  for (auto& v : t.values()) v = v >= 0 ? v + margin : v - margin;
  return t;
}

/// Parameters of `layout` on the 64-bit path, plus the same tensors as a flat
/// input list for the checker.
struct ParamSet {
  ModelParams<double> map;
  Inputs list;
};

ParamSet params_for(const ParamLayout& layout, std::uint64_t seed) {
  ParamSet ps;
  ps.map = materialize<double>(layout, seed);
  // Perturb the structured initial values (unit gammas, zero biases) so no
  // gradient is trivially symmetric.
  SplitMix64 rng(seed + 1);
  for (auto& [name, t] : ps.map) {
    for (auto& v : t.values()) v += 0.1 * rng.normal();
    ps.list.push_back(t);
  }
  return ps;
}

Inputs with_front(const T& x, const Inputs& rest) {
  Inputs all{x};
  all.insert(all.end(), rest.begin(), rest.end());
  return all;
}

}  // namespace

std::vector<CheckResult> gradcheck_suite() {
  std::vector<CheckResult> out;
  SplitMix64 rng(2024);
  constexpr double op_tol = 1e-4, net_tol = 1e-4;
  auto run = [&](const std::string& name, const LossFn& f, Inputs in, GradCheckOptions opt = {}) {
    opt.tol = opt.tol > 0 ? opt.tol : op_tol;
    out.push_back(to_check(gradcheck(name, f, std::move(in), opt), opt.tol));
  };
  auto r = [&](const Shape& s) { return random_tensor(s, rng); };

  // Element-wise and broadcasting arithmetic.
  run("add_broadcast", [](const Inputs& v) { return project(add(v[0], v[1])); }, {r({2, 3, 4}), r({3, 1})});
  run("sub_broadcast", [](const Inputs& v) { return project(sub(v[0], v[1])); }, {r({2, 3, 4}), r({4})});
  run("mul_broadcast", [](const Inputs& v) { return project(mul(v[0], v[1])); }, {r({2, 3, 4}), r({2, 1, 4})});
  run("scale", [](const Inputs& v) { return project(scale(v[0], 0.7)); }, {r({5})});
  run("add_scalar", [](const Inputs& v) { return project(mul(add_scalar(v[0], 0.3), v[0])); }, {r({5})});
  run("relu", [](const Inputs& v) { return project(relu(v[0])); }, {away_from_zero(r({3, 5}), 0.05)});
  run("sigmoid", [](const Inputs& v) { return project(sigmoid(v[0])); }, {r({3, 5})});
  run("exp", [](const Inputs& v) { return project(omnisr::exp(v[0])); }, {r({3, 5})});
  run("gelu", [](const Inputs& v) { return project(gelu(v[0])); }, {r({3, 5})});
  run("sum", [](const Inputs& v) { return sum(mul(v[0], v[0])); }, {r({4, 3})});
  run("mean", [](const Inputs& v) { return mean(mul(v[0], v[0])); }, {r({4, 3})});
  run("mean_spatial", [](const Inputs& v) { return project(mean_spatial(v[0])); }, {r({2, 3, 4, 5})});

  // Layout primitives.
  run("reshape", [](const Inputs& v) { return project(reshape(v[0], Shape{6, 4})); }, {r({2, 3, 4})});
  run("permute", [](const Inputs& v) { return project(permute(v[0], {2, 0, 1})); }, {r({2, 3, 4})});
  run("slice", [](const Inputs& v) { return project(slice(v[0], 1, 1, 2)); }, {r({2, 4, 3})});
  run("rotate", [](const Inputs& v) { return project(rotate(v[0])); }, {r({2, 5, 3})});
  run("rotate_inverse", [](const Inputs& v) { return project(rotate_inverse(v[0])); }, {r({2, 3, 5})});
  run("pad_reflect", [](const Inputs& v) { return project(pad_reflect(v[0], 3, 2)); }, {r({1, 2, 4, 3})});
  run("crop", [](const Inputs& v) { return project(crop(v[0], 3, 2)); }, {r({1, 2, 4, 3})});
  run("pixel_shuffle", [](const Inputs& v) { return project(pixel_shuffle(v[0], 2)); }, {r({1, 8, 3, 2})});
  run("pixel_unshuffle", [](const Inputs& v) { return project(pixel_unshuffle(v[0], 2)); }, {r({1, 2, 4, 6})});
  run("meso_partition", [](const Inputs& v) { return project(meso_partition(v[0], 2)); }, {r({1, 4, 6, 3})});
  run("global_partition", [](const Inputs& v) { return project(global_partition(v[0], 2)); }, {r({1, 4, 6, 3})});

  // Products and row-wise normalizations.
  run("matmul", [](const Inputs& v) { return project(matmul(v[0], v[1])); }, {r({3, 4}), r({4, 2})});
  run("matmul_batched", [](const Inputs& v) { return project(matmul(v[0], v[1])); }, {r({2, 3, 4}), r({4, 5})});
  run("matmul_nt", [](const Inputs& v) { return project(matmul_nt(v[0], v[1])); }, {r({2, 3, 4}), r({2, 5, 4})});
  run("softmax_lastdim", [](const Inputs& v) { return project(softmax_lastdim(v[0])); }, {r({3, 6})});
  run("layernorm", [](const Inputs& v) { return project(layernorm(v[0], v[1], v[2])); },
      {r({4, 8}), r({8}), r({8})});
  run("l2_normalize_lastdim", [](const Inputs& v) { return project(l2_normalize_lastdim(v[0])); }, {r({3, 5})});
  run("l1_loss", [](const Inputs& v) { return l1_loss(v[0], v[1]); }, {r({2, 3, 4}), r({2, 3, 4})});

  // Convolutions, pooling and resizing.
  run("conv2d_dense", [](const Inputs& v) { return project(conv2d(v[0], v[1], v[2], Conv2dOptions{1, 1, 1})); },
      {r({1, 2, 5, 5}), r({3, 2, 3, 3}), r({3})});
  run("conv2d_strided", [](const Inputs& v) { return project(conv2d(v[0], v[1], v[2], Conv2dOptions{2, 0, 1})); },
      {r({2, 2, 7, 6}), r({3, 2, 3, 3}), r({3})});
  run("conv2d_depthwise",
      [](const Inputs& v) { return project(conv2d(v[0], v[1], v[2], Conv2dOptions{1, 1, 4})); },
      {r({1, 4, 5, 5}), r({4, 1, 3, 3}), r({4})});
  run("conv2d_grouped", [](const Inputs& v) { return project(conv2d(v[0], v[1], v[2], Conv2dOptions{1, 1, 2})); },
      {r({1, 4, 4, 5}), r({6, 2, 3, 3}), r({6})});
  run("conv2d_pointwise",
      [](const Inputs& v) { return project(conv2d(v[0], v[1], v[2], Conv2dOptions{1, 0, 1})); },
      {r({2, 3, 4, 4}), r({5, 3, 1, 1}), r({5})});
  run("max_pool2d", [](const Inputs& v) { return project(max_pool2d(v[0], 3, 3, 2)); }, {r({1, 2, 7, 7})});
  run("resize_bilinear_up", [](const Inputs& v) { return project(resize_bilinear(v[0], 7, 9)); }, {r({1, 2, 3, 4})});
  run("resize_bilinear_down", [](const Inputs& v) { return project(resize_bilinear(v[0], 3, 2)); },
      {r({1, 2, 6, 5})});
  run("resize_nearest", [](const Inputs& v) { return project(resize_nearest(v[0], 6, 8)); }, {r({1, 2, 3, 4})});

  // Attention stages.
  run("spatial_attention", [](const Inputs& v) { return project(spatial_attention(v[0], v[1], v[2], 2)); },
      {r({2, 5, 4}), r({2, 5, 4}), r({2, 5, 4})});
  run("channel_attention",
      [](const Inputs& v) { return project(channel_attention(v[0], v[1], v[2], 2, v[3])); },
      {r({2, 5, 4}), r({2, 5, 4}), r({2, 5, 4}), r({2})});
  {
    BlockConfig bc;
    bc.channels = 4;
    bc.heads = 2;
    for (auto kind : {AttentionKind::omni, AttentionKind::spatial_only, AttentionKind::channel_only,
                      AttentionKind::se_hybrid}) {
      bc.attention = kind;
      ParamLayout layout;
      declare_attention(layout, "attn", bc);
      auto ps = params_for(layout, 11);
      const auto cfg = bc;
      const std::string names[] = {"omni", "spatial_only", "channel_only", "se_hybrid"};
      run("omni_self_attention_" + names[static_cast<int>(kind)],
          [ps, cfg](const Inputs& v) {
            const ParamScope<double> root(ps.map, "attn");
            return project(omni_self_attention(v[0], attention_params(root, cfg), cfg.attention, cfg.channel_inputs));
          },
          with_front(r({2, 6, 4}), ps.list));
    }
    bc.attention = AttentionKind::omni;
    bc.channel_inputs = ChannelInputs::embed;
    ParamLayout layout;
    declare_attention(layout, "attn", bc);
    auto ps = params_for(layout, 12);
    run("omni_self_attention_embed",
        [ps, bc](const Inputs& v) {
          const ParamScope<double> root(ps.map, "attn");
          return project(omni_self_attention(v[0], attention_params(root, bc), bc.attention, bc.channel_inputs));
        },
        with_front(r({1, 6, 4}), ps.list));
  }

  // Blocks on reduced configurations.
  BlockConfig small;
  small.channels = 8;
  small.heads = 2;
  small.window = 8;
  {
    ParamLayout layout;
    declare_se(layout, "se", 8, 2);
    auto ps = params_for(layout, 21);
    run("se_attention",
        [ps](const Inputs& v) { return project(se_attention(v[0], ParamScope<double>(ps.map, "se"))); },
        with_front(r({2, 8, 4, 4}), ps.list));
  }
  {
    ParamLayout layout;
    declare_lcb(layout, "lcb", small);
    auto ps = params_for(layout, 22);
    run("lcb_forward",
        [ps, small](const Inputs& v) { return project(lcb_forward(v[0], ParamScope<double>(ps.map, "lcb"), small)); },
        with_front(r({1, 8, 6, 6}), ps.list));
  }
  {
    ParamLayout layout;
    declare_gdfn(layout, "ffn", small);
    auto ps = params_for(layout, 23);
    run("gdfn_forward",
        [ps](const Inputs& v) { return project(gdfn_forward(v[0], ParamScope<double>(ps.map, "ffn"))); },
        with_front(r({1, 8, 5, 5}), ps.list));
  }
  for (auto mode : {PartitionMode::meso, PartitionMode::global}) {
    ParamLayout layout;
    declare_osa_block(layout, "blk", small);
    auto ps = params_for(layout, 24);
    const bool meso = mode == PartitionMode::meso;
    GradCheckOptions opt;
    opt.max_coords = 64;
    run(meso ? "osa_block_meso" : "osa_block_global",
        [ps, small, mode](const Inputs& v) {
          return project(osa_block_forward(v[0], mode, ParamScope<double>(ps.map, "blk"), small));
        },
        with_front(r({1, 8, 16, 16}), ps.list), opt);
  }
  {
    BlockConfig padded = small;
    padded.window = 4;
    ParamLayout layout;
    declare_osa_block(layout, "blk", padded);
    auto ps = params_for(layout, 25);
    GradCheckOptions opt;
    opt.max_coords = 48;
    run("osa_block_padded",
        [ps, padded](const Inputs& v) {
          return project(osa_block_forward(v[0], PartitionMode::global, ParamScope<double>(ps.map, "blk"), padded));
        },
        with_front(r({1, 8, 7, 6}), ps.list), opt);
  }
  {
    ParamLayout layout;
    declare_esa(layout, "esa", small);
    auto ps = params_for(layout, 26);
    for (std::int64_t hw : {9, 19}) {  // global-pool fallback, then the 7x7/3 pool
      run("esa_forward_" + std::to_string(hw),
          [ps](const Inputs& v) { return project(esa_forward(v[0], ParamScope<double>(ps.map, "esa"))); },
          with_front(r({1, 8, hw, hw}), ps.list));
    }
  }
  {
    BlockConfig cfg = small;
    cfg.channels = 16;
    cfg.window = 8;
    ParamLayout layout;
    declare_osag(layout, "g", cfg);
    auto ps = params_for(layout, 27);
    GradCheckOptions opt;
    opt.max_coords = 24;
    run("osag_forward",
        [ps, cfg](const Inputs& v) { return project(osag_forward(v[0], ParamScope<double>(ps.map, "g"), cfg)); },
        with_front(r({1, 16, 16, 16}), ps.list), opt);
  }

  // Whole network, every parameter.
  {
    NetworkConfig net;
    net.osag_count = 1;
    net.scale = 2;
    net.block.channels = 8;
    net.block.heads = 2;
    net.block.window = 4;
    net.init = InitScheme::standard;
    net.seed = 5;
    auto ps = params_for(network_layout(net), 31);
    SplitMix64 img(77);
    T lr(Shape{1, 3, 16, 16});
    for (auto& v : lr.values()) v = img.uniform();
    GradCheckOptions opt;
    opt.tol = net_tol;
    run("network_k1_c8",
        [ps, net](const Inputs& v) { return project(forward(v[0], ps.map, net)); },
        with_front(lr, ps.list), opt);
  }
  return out;
}

}  // namespace omnisr::verify
