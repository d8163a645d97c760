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

#include <cmath>
#include <cstdio>

#include "omnisr/blocks.hpp"
#include "verify/gradcheck.hpp"
#include "verify/oracles.hpp"
#include "verify/suites.hpp"

namespace omnisr::verify {

namespace {

std::string fmt(const char* f, double a, double b = 0.0) {
  char buf[160];
  std::snprintf(buf, sizeof(buf), f, a, b);
  return buf;
}

double max_abs_diff(const Tensor<double>& a, const Tensor<float>& b) {
  double m = 0.0;
  for (std::int64_t i = 0; i < a.numel(); ++i) m = std::max(m, std::abs(a[i] - static_cast<double>(b[i])));
  return m;
}

Tensor<double> uniform_tensor(const Shape& s, SplitMix64& rng, double lo = -1.0, double hi = 1.0) {
  Tensor<double> t(s);
  for (auto& v : t.values()) v = lo + (hi - lo) * rng.uniform();
  return t;
}

AttentionParams<double> random_attention(std::int64_t c, int heads, SplitMix64& rng) {
  AttentionParams<double> p;
  p.heads = heads;
  const double s = 1.0 / std::sqrt(static_cast<double>(c));
  for (auto* w : {&p.wq, &p.wk, &p.wv, &p.wout}) *w = uniform_tensor({c, c}, rng, -2 * s, 2 * s);
  for (auto* b : {&p.bq, &p.bk, &p.bv, &p.bout}) *b = uniform_tensor({c}, rng, -0.2, 0.2);
  p.log_tau = uniform_tensor({heads}, rng, -0.5, 0.5);
  return p;
}

template <typename To>
AttentionParams<To> cast_attention(const AttentionParams<double>& p) {
  AttentionParams<To> o;
  o.heads = p.heads;
  o.wq = p.wq.cast<To>();
  o.bq = p.bq.cast<To>();
  o.wk = p.wk.cast<To>();
  o.bk = p.bk.cast<To>();
  o.wv = p.wv.cast<To>();
  o.bv = p.bv.cast<To>();
  o.wout = p.wout.cast<To>();
  o.bout = p.bout.cast<To>();
  o.log_tau = p.log_tau.cast<To>();
  return o;
}

}  // namespace

std::vector<CheckResult> attention_suite() {
  std::vector<CheckResult> out;
  SplitMix64 rng(99);
  constexpr int kInstances = 120;
  constexpr double kTol = 1e-5;
  double worst_s = 0, worst_c = 0, worst_o = 0;
  for (int it = 0; it < kInstances; ++it) {
    const std::int64_t b = 1 + static_cast<std::int64_t>(rng.next() % 2);
    const std::int64_t n = 1 + static_cast<std::int64_t>(rng.next() % 9);
    const int heads = 1 + static_cast<int>(rng.next() % 3);
    const std::int64_t c = heads * (1 + static_cast<std::int64_t>(rng.next() % 4));
    const auto q = uniform_tensor({b, n, c}, rng), k = uniform_tensor({b, n, c}, rng),
               v = uniform_tensor({b, n, c}, rng);
    const auto log_tau = uniform_tensor({heads}, rng, -0.5, 0.5);
    std::vector<double> tau;
    for (int h = 0; h < heads; ++h) tau.push_back(std::exp(static_cast<double>(log_tau.cast<float>()[h])));
    const auto qf = q.cast<float>(), kf = k.cast<float>(), vf = v.cast<float>();
    // Oracles run in double on the float-rounded inputs the library sees.
    const auto qd = qf.cast<double>(), kd = kf.cast<double>(), vd = vf.cast<double>();
    worst_s = std::max(worst_s, max_abs_diff(spatial_attention_loops(qd, kd, vd, heads),
                                             spatial_attention(qf, kf, vf, heads)));
    worst_c = std::max(worst_c, max_abs_diff(channel_attention_loops(qd, kd, vd, heads, tau),
                                             channel_attention(qf, kf, vf, heads, log_tau.cast<float>())));
    const auto p = random_attention(c, heads, rng);
    const auto pf = cast_attention<float>(p);
    AttentionParams<double> rounded;
    rounded.heads = heads;
    rounded.wq = pf.wq.cast<double>();
    rounded.bq = pf.bq.cast<double>();
    rounded.wk = pf.wk.cast<double>();
    rounded.bk = pf.bk.cast<double>();
    rounded.wv = pf.wv.cast<double>();
    rounded.bv = pf.bv.cast<double>();
    rounded.wout = pf.wout.cast<double>();
    rounded.bout = pf.bout.cast<double>();
    rounded.log_tau = pf.log_tau.cast<double>();
    worst_o = std::max(worst_o, max_abs_diff(omni_attention_loops(qd, rounded), omni_self_attention(qf, pf)));
  }
  const std::string n = " over " + std::to_string(kInstances) + " random instances";
  out.push_back({"spatial_vs_loops", worst_s <= kTol, fmt("max abs err %.2e", worst_s) + n});
  out.push_back({"channel_vs_loops", worst_c <= kTol, fmt("max abs err %.2e", worst_c) + n});
  out.push_back({"omni_vs_loops", worst_o <= kTol, fmt("max abs err %.2e", worst_o) + n});

  // W_q = W_k = 0, W_v = W_out = I: both softmaxes are uniform, so every
  // output equals the mean of x over all tokens and the head's channels.
  {
    const std::int64_t c = 6, ntok = 5;
    const int heads = 2;
    AttentionParams<double> p;
    p.heads = heads;
    p.wq = Tensor<double>(Shape{c, c});
    p.wk = Tensor<double>(Shape{c, c});
    p.wv = Tensor<double>(Shape{c, c});
    p.wout = Tensor<double>(Shape{c, c});
    for (std::int64_t i = 0; i < c; ++i) {
      p.wv[i * c + i] = 1.0;
      p.wout[i * c + i] = 1.0;
    }
    for (auto* bias : {&p.bq, &p.bk, &p.bv, &p.bout}) *bias = Tensor<double>(Shape{c});
    p.log_tau = Tensor<double>(Shape{heads});
    const auto x = uniform_tensor({1, ntok, c}, rng);
    const auto y = omni_self_attention(x, p);
    double err = 0.0;
    const std::int64_t d = c / heads;
    for (int h = 0; h < heads; ++h) {
      double m = 0.0;
      for (std::int64_t t = 0; t < ntok; ++t) {
        for (std::int64_t e = 0; e < d; ++e) m += x[t * c + h * d + e];
      }
      m /= static_cast<double>(ntok * d);
      for (std::int64_t t = 0; t < ntok; ++t) {
        for (std::int64_t e = 0; e < d; ++e) err = std::max(err, std::abs(y[t * c + h * d + e] - m));
      }
    }
    out.push_back({"uniform_closed_form", err <= 1e-12, fmt("max abs err %.2e", err)});
  }
  return out;
}

// ----------------------------------------------------------------- partition

std::vector<CheckResult> partition_suite() {
  std::vector<CheckResult> out;
  SplitMix64 rng(7);
  int trips = 0, trip_fail = 0, map_fail = 0, shape_fail = 0;
  for (int it = 0; it < 200; ++it) {
    const std::int64_t e = 1 + static_cast<std::int64_t>(rng.next() % 8);  // P or G
    const std::int64_t a = 1 + static_cast<std::int64_t>(rng.next() % 4), bb = 1 + static_cast<std::int64_t>(rng.next() % 4);
    const std::int64_t h = e * a, w = e * bb, c = 1 + static_cast<std::int64_t>(rng.next() % 3);
    const std::int64_t batch = 1 + static_cast<std::int64_t>(rng.next() % 2);
    Tensor<float> x(Shape{batch, h, w, c});
    for (std::int64_t i = 0; i < x.numel(); ++i) x[i] = static_cast<float>(i);  // value = flat index
    for (auto mode : {PartitionMode::meso, PartitionMode::global}) {
      const WindowSpec spec{mode, e, e};
      const auto win = partition(x, spec);
      const std::int64_t nwin = h * w / (e * e);
      if (win.shape() != Shape{batch * nwin, e * e, c}) ++shape_fail;
      ++trips;
      if (!same_values(merge(win, x.shape(), spec), x)) ++trip_fail;
      for (std::int64_t n = 0; n < batch; ++n) {
        for (std::int64_t i = 0; i < h; ++i) {
          for (std::int64_t j = 0; j < w; ++j) {
            const WindowSlot s = mode == PartitionMode::meso ? meso_slot(i, j, w, e) : global_slot(i, j, h, w, e);
            for (std::int64_t ch = 0; ch < c; ++ch) {
              const float expect = static_cast<float>(((n * h + i) * w + j) * c + ch);
              if (win[((n * nwin + s.window) * e * e + s.token) * c + ch] != expect) ++map_fail;
            }
          }
        }
      }
    }
  }
  out.push_back({"round_trip", trip_fail == 0,
                 std::to_string(trips - trip_fail) + "/" + std::to_string(trips) + " bit-exact round trips"});
  out.push_back({"window_shapes", shape_fail == 0, std::to_string(shape_fail) + " shape mismatches"});
  out.push_back({"golden_index_maps", map_fail == 0, std::to_string(map_fail) + " misplaced elements"});

  // Degenerate extents: one window covering the map, and one pixel windows.
  {
    Tensor<float> x(Shape{8, 8, 3});
    for (std::int64_t i = 0; i < x.numel(); ++i) x[i] = static_cast<float>(i);
    const auto m = meso_partition(x, 8), g = global_partition(x, 8);
    const auto m1 = meso_partition(x, 1), g1 = global_partition(x, 1);
    const bool ok = m.shape() == Shape{1, 64, 3} && g.shape() == Shape{1, 64, 3} && same_values(m, g) &&
                    m1.shape() == Shape{64, 1, 3} && g1.shape() == Shape{64, 1, 3} &&
                    same_values(meso_merge(m1, x.shape(), 1), x) && same_values(global_merge(g1, x.shape(), 1), x);
    out.push_back({"degenerate_windows", ok, "P = G = H = W and unit windows"});
  }
  // Dilated sampling example: 16 x 16 with G = 8 puts (2i, 2j) in window 0.
  {
    Tensor<float> x(Shape{16, 16, 1});
    for (std::int64_t i = 0; i < x.numel(); ++i) x[i] = static_cast<float>(i);
    const auto g = global_partition(x, 8);
    bool ok = g.shape() == Shape{4, 64, 1};
    for (std::int64_t i = 0; i < 8 && ok; ++i) {
      for (std::int64_t j = 0; j < 8; ++j) ok = ok && g[i * 8 + j] == static_cast<float>((2 * i) * 16 + 2 * j);
    }
    out.push_back({"dilated_window0", ok, "window 0 = {(2i, 2j)}"});
  }
  // Indivisible extents are rejected.
  {
    bool threw = false;
    try {
      meso_partition(Tensor<float>(Shape{6, 8, 1}), 4);
    } catch (const PartitionError&) {
      threw = true;
    }
    out.push_back({"indivisible_rejected", threw, "6 x 8 with P = 4 raises a partition error"});
  }
  return out;
}

// ----------------------------------------------------------- receptive field

namespace {

struct BlockFixture {
  BlockConfig cfg;
  ModelParams<float> params;
};

BlockFixture osa_fixture(std::int64_t window) {
  BlockFixture f;
  f.cfg.channels = 8;
  f.cfg.heads = 2;
  f.cfg.window = window;
  ParamLayout layout;
  declare_osa_block(layout, "blk", f.cfg);
  f.params = materialize<float>(layout, 3);
  SplitMix64 rng(4);
  for (auto& [name, t] : f.params) {
    for (auto& v : t.values()) v += static_cast<float>(0.2 * rng.normal());
  }
  return f;
}

Tensor<float> random_map(SplitMix64& rng, std::int64_t c, std::int64_t h, std::int64_t w) {
  Tensor<float> x(Shape{1, c, h, w});
  for (auto& v : x.values()) v = static_cast<float>(rng.normal());
  return x;
}

/// Positions (i, j) whose output changed when input pixel (pi, pj) moved.
std::vector<std::vector<bool>> influence(const Tensor<float>& before, const Tensor<float>& after) {
  const std::int64_t c = before.dim(1), h = before.dim(2), w = before.dim(3);
  std::vector<std::vector<bool>> hit(static_cast<std::size_t>(h), std::vector<bool>(static_cast<std::size_t>(w)));
  for (std::int64_t ch = 0; ch < c; ++ch) {
    for (std::int64_t i = 0; i < h; ++i) {
      for (std::int64_t j = 0; j < w; ++j) {
        if (before[(ch * h + i) * w + j] != after[(ch * h + i) * w + j]) hit[i][j] = true;
      }
    }
  }
  return hit;
}

}  // namespace

std::vector<CheckResult> receptive_field_suite() {
  std::vector<CheckResult> out;
  SplitMix64 rng(12);
  const std::int64_t h = 16, w = 16, p = 4;
  const auto f = osa_fixture(p);
  const ParamScope<float> scope(f.params, "blk");
  const auto x = random_map(rng, 8, h, w);
  auto perturbed = x.clone();
  const std::int64_t pi = 5, pj = 6;  // inside meso window (1, 1)
  // Random per-channel offsets; a uniform shift would vanish under LayerNorm.
  for (std::int64_t ch = 0; ch < 8; ++ch) perturbed[(ch * h + pi) * w + pj] += static_cast<float>(rng.normal());

  // Attention stage alone: windows other than the perturbed one are
  // bit-identical.
  {
    auto stage = [&](const Tensor<float>& in) {
      const WindowSpec spec{PartitionMode::meso, p, p};
      auto t = permute(in, {0, 2, 3, 1});
      const auto n1 = scope.sub("norm1");
      auto win = partition(t, spec);
      auto y = omni_self_attention(layernorm(win, n1["gamma"], n1["beta"]), attention_params(scope.sub("attn"), f.cfg));
      return permute(merge(add(win, y), t.shape(), spec), {0, 3, 1, 2});
    };
    const auto hit = influence(stage(x), stage(perturbed));
    int outside = 0, inside = 0;
    for (std::int64_t i = 0; i < h; ++i) {
      for (std::int64_t j = 0; j < w; ++j) {
        const bool same_window = i / p == pi / p && j / p == pj / p;
        if (hit[i][j]) (same_window ? inside : outside)++;
      }
    }
    out.push_back({"meso_attention_locality", outside == 0 && inside == p * p,
                   std::to_string(outside) + " changed outside the window, " + std::to_string(inside) + "/" +
                       std::to_string(p * p) + " inside"});
  }
  // Whole Meso-OSA block: the feed-forward 3x3 depthwise conv adds a one
  // pixel halo; beyond it the output is bit-identical.
  {
    const auto hit = influence(osa_block_forward(x, PartitionMode::meso, scope, f.cfg),
                               osa_block_forward(perturbed, PartitionMode::meso, scope, f.cfg));
    const std::int64_t y0 = pi / p * p - 1, y1 = pi / p * p + p, x0 = pj / p * p - 1, x1 = pj / p * p + p;
    int outside = 0;
    for (std::int64_t i = 0; i < h; ++i) {
      for (std::int64_t j = 0; j < w; ++j) {
        const bool near = i >= y0 && i <= y1 && j >= x0 && j <= x1;
        if (hit[i][j] && !near) ++outside;
      }
    }
    out.push_back({"meso_block_locality", outside == 0,
                   std::to_string(outside) + " positions changed beyond the window plus one pixel"});
  }
  // Global-OSA block: every dilated position sharing the perturbed pixel's
  // intra-cell offset responds, however far away.
  {
    const auto hit = influence(osa_block_forward(x, PartitionMode::global, scope, f.cfg),
                               osa_block_forward(perturbed, PartitionMode::global, scope, f.cfg));
    const std::int64_t cell = h / p;
    int reached = 0, total = 0;
    for (std::int64_t i = pi % cell; i < h; i += cell) {
      for (std::int64_t j = pj % cell; j < w; j += cell) {
        ++total;
        if (hit[i][j]) ++reached;
      }
    }
    out.push_back({"global_block_reach", reached == total,
                   std::to_string(reached) + "/" + std::to_string(total) + " dilated positions influenced"});
  }
  return out;
}

}  // namespace omnisr::verify
