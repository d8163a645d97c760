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
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>

#include <unistd.h>
#include <zlib.h>

#include "omnisr/checkpoint.hpp"
#include "omnisr/config.hpp"
#include "omnisr/evalkit.hpp"
#include "omnisr/file_io.hpp"
#include "omnisr/flop_counter.hpp"
#include "omnisr/png_io.hpp"
#include "verify/oracles.hpp"
#include "verify/suites.hpp"

namespace omnisr::verify {

namespace {

std::string fmt(const char* f, double a, double b = 0.0) {
  char buf[160];
  std::snprintf(buf, sizeof(buf), f, a, b);
  return buf;
}

double max_abs_diff(const Image& a, const Image& b) {
  if (a.shape() != b.shape()) return std::numeric_limits<double>::infinity();
  double m = 0.0;
  for (std::int64_t i = 0; i < a.numel(); ++i) m = std::max(m, std::abs(static_cast<double>(a[i]) - b[i]));
  return m;
}

Image random_image(SplitMix64& rng, std::int64_t c, std::int64_t h, std::int64_t w) {
  Image img(Shape{c, h, w});
  for (auto& v : img.values()) v = static_cast<float>(rng.uniform());
  return img;
}

/// Replaces the CRC-32 trailer so the payload passes the integrity check.
std::string reseal_checkpoint(std::string bytes) {
  bytes.resize(bytes.size() - 4);
  const auto crc = static_cast<std::uint32_t>(
      crc32(crc32(0L, Z_NULL, 0), reinterpret_cast<const Bytef*>(bytes.data()), static_cast<uInt>(bytes.size())));
  for (int i = 0; i < 4; ++i) bytes.push_back(static_cast<char>((crc >> (8 * i)) & 0xff));
  return bytes;
}

Image shave_plane(const Image& y, std::int64_t s) {
  return crop_region(y, s, s, y.dim(1) - 2 * s, y.dim(2) - 2 * s);
}

}  // namespace

// ------------------------------------------------------------------ bicubic

std::vector<CheckResult> bicubic_suite() {
  std::vector<CheckResult> out;
  {
    Image ramp(Shape{1, 8, 8});
    for (std::int64_t i = 0; i < 8; ++i) {
      for (std::int64_t j = 0; j < 8; ++j) ramp[i * 8 + j] = static_cast<float>(i * 8 + j) / 63.0f;
    }
    const double err = max_abs_diff(bicubic_resize(ramp, 16, 16), bicubic_direct(ramp, 16, 16));
    out.push_back({"ramp_x2_vs_direct", err <= 1e-6, fmt("max abs err %.2e", err)});
  }
  {
    SplitMix64 rng(5);
    double worst = 0.0;
    for (auto [h, w, oh, ow] : std::vector<std::array<std::int64_t, 4>>{
             {9, 7, 27, 21}, {12, 16, 6, 8}, {10, 10, 15, 25}, {16, 12, 4, 3}, {5, 6, 20, 24}}) {
      const auto img = random_image(rng, 3, h, w);
      worst = std::max(worst, max_abs_diff(bicubic_resize(img, oh, ow), bicubic_direct(img, oh, ow)));
    }
    out.push_back({"random_vs_direct", worst <= 1e-6, fmt("max abs err %.2e over up and down scales", worst)});
  }
  {
    SplitMix64 rng(6);
    const auto img = random_image(rng, 3, 11, 13);
    out.push_back({"identity_size", same_values(bicubic_resize(img, 11, 13), img), "same-size resize is exact"});
  }
  {
    Image flat(Shape{3, 7, 9}, 0.375f);
    const double err = std::max(max_abs_diff(bicubic_resize(flat, 28, 36), Image(Shape{3, 28, 36}, 0.375f)),
                                max_abs_diff(bicubic_resize(flat, 3, 4), Image(Shape{3, 3, 4}, 0.375f)));
    out.push_back({"constant_preserved", err <= 1e-6, fmt("max abs err %.2e", err)});
  }
  return out;
}

// ------------------------------------------------------------------ metrics

std::vector<CheckResult> metrics_suite() {
  std::vector<CheckResult> out;
  SplitMix64 rng(21);
  {
    const auto a = random_image(rng, 3, 16, 16);
    const double p = psnr(a, a, 0), s = ssim(a, a, 0);
    out.push_back({"identical_inputs", std::isinf(p) && p > 0 && std::abs(s - 1.0) < 1e-12,
                   fmt("psnr %g, ssim %.15f", p, s)});
  }
  {
    const Image zero(Shape{1, 8, 8}, 0.0f), one(Shape{1, 8, 8}, 1.0f), half(Shape{1, 8, 8}, 0.5f);
    const double p0 = psnr(zero, one, 0), p6 = psnr(zero, half, 0);
    const double want6 = 10.0 * std::log10(4.0);
    out.push_back({"psnr_closed_form", p0 == 0.0 && std::abs(p6 - want6) < 1e-12,
                   fmt("0 vs 1: %g dB, 0 vs 0.5: %.12f dB", p0, p6)});
  }
  {
    const auto a = random_image(rng, 1, 32, 32), b = random_image(rng, 1, 32, 32);
    const double ep = std::abs(psnr(a, b, 0) - psnr_direct(a, b));
    const double es = std::abs(ssim(a, b, 0) - ssim_direct(a, b));
    out.push_back({"golden_32x32", ep <= 1e-6 && es <= 1e-6, fmt("psnr err %.2e, ssim err %.2e", ep, es)});
  }
  {
    const auto a = random_image(rng, 3, 20, 24), b = random_image(rng, 3, 20, 24);
    const bool sym = psnr(a, b, 2) == psnr(b, a, 2) && std::abs(ssim(a, b, 2) - ssim(b, a, 2)) < 1e-12;
    out.push_back({"symmetry", sym, "psnr(a, b) = psnr(b, a), ssim likewise"});
    const auto ya = rgb_to_y(a), yb = rgb_to_y(b);
    const double dp = std::abs(psnr(a, b, 3) - psnr(shave_plane(ya, 3), shave_plane(yb, 3), 0));
    const double ds = std::abs(ssim(a, b, 3) - ssim(shave_plane(ya, 3), shave_plane(yb, 3), 0));
    out.push_back({"shave_equivalence", dp < 1e-12 && ds < 1e-12,
                   fmt("shaving equals cropping first: %.1e / %.1e", dp, ds)});
  }
  {
    Image px(Shape{3, 1, 3});
    const float rgb[3][3] = {{0, 0, 0}, {1, 1, 1}, {1, 0, 0}};
    for (int k = 0; k < 3; ++k) {
      for (int ch = 0; ch < 3; ++ch) px[ch * 3 + k] = rgb[k][ch];
    }
    const auto y = rgb_to_y(px);
    const double want[3] = {16.0 / 255.0, 235.0 / 255.0, (65.481 + 16.0) / 255.0};
    double err = 0.0;
    for (int k = 0; k < 3; ++k) err = std::max(err, std::abs(y[k] - want[k]));
    out.push_back({"rgb_to_y_examples", err < 1e-6, fmt("black, white, red: max err %.2e", err)});
  }
  {
    const std::string dir = fixture_dir();
    try {
      std::ifstream ref(dir + "/reference_metrics.txt");
      std::map<std::string, double> want;
      std::string key;
      double value = 0.0;
      while (ref >> key >> value) want[key] = value;
      const auto a = png_read(dir + "/metric_ref.png"), b = png_read(dir + "/metric_test.png");
      const double p = psnr(a, b, 4), s = ssim(a, b, 4);
      const bool ok = want.count("psnr") && want.count("ssim") && std::abs(p - want["psnr"]) <= 0.01 &&
                      std::abs(s - want["ssim"]) <= 1e-4;
      out.push_back({"python_reference", ok,
                     fmt("psnr %.4f dB (ref %.4f)", p, want["psnr"]) + fmt(", ssim %.5f (ref %.5f)", s, want["ssim"])});
      const std::vector<std::pair<std::string, Image>> hr{{"bicubic_hr", png_read(dir + "/bicubic_hr.png")}};
      const double bp = run_benchmark(bicubic_model(4), hr, 4).mean_psnr();
      out.push_back({"python_bicubic_x4", want.count("bicubic_x4_psnr") && std::abs(bp - want["bicubic_x4_psnr"]) <= 0.01,
                     fmt("x4 round trip %.4f dB (ref %.4f)", bp, want["bicubic_x4_psnr"])});
    } catch (const std::exception& e) {
      out.push_back({"python_reference", false, e.what()});
    }
  }
  return out;
}

// -------------------------------------------------------------------- flops

std::vector<CheckResult> flops_suite() {
  std::vector<CheckResult> out;
  struct Case {
    const char* name;
    AttentionKind kind;
    ChannelInputs inputs;
    std::int64_t h, w;
  };
  const Case cases[] = {
      {"omni", AttentionKind::omni, ChannelInputs::copy, 16, 16},
      {"omni_padded", AttentionKind::omni, ChannelInputs::copy, 13, 10},
      {"omni_embed", AttentionKind::omni, ChannelInputs::embed, 16, 12},
      {"spatial_only", AttentionKind::spatial_only, ChannelInputs::copy, 16, 16},
      {"channel_only", AttentionKind::channel_only, ChannelInputs::copy, 12, 20},
      {"se_hybrid", AttentionKind::se_hybrid, ChannelInputs::copy, 9, 16},
      {"small_esa", AttentionKind::omni, ChannelInputs::copy, 8, 8},
  };
  for (const auto& c : cases) {
    NetworkConfig cfg;
    cfg.osag_count = 2;
    cfg.scale = 3;
    cfg.block.channels = 8;
    cfg.block.heads = 2;
    cfg.block.window = 4;
    cfg.block.attention = c.kind;
    cfg.block.channel_inputs = c.inputs;
    const auto params = init_params<float>(cfg);
    Tensor<float> lr(Shape{1, 3, c.h, c.w}, 0.5f);
    std::uint64_t measured = 0;
    {
      const NoGradScope<float> no_grad;
      const MacCountScope scope;
      forward(lr, params, cfg);
      measured = scope.count();
    }
    const std::uint64_t predicted = count_macs(cfg, c.h, c.w);
    out.push_back({std::string("macs_") + c.name, measured == predicted,
                   "instrumented " + std::to_string(measured) + ", analytic " + std::to_string(predicted)});
  }
  return out;
}

// ---------------------------------------------------------------- roundtrip

namespace {

NetworkConfig fixture_network() {
  NetworkConfig cfg;
  cfg.osag_count = 1;
  cfg.scale = 2;
  cfg.seed = 11;
  cfg.block.channels = 8;
  cfg.block.heads = 2;
  cfg.block.window = 4;
  return cfg;
}

}  // namespace

/// param_hash of init_params<float>(fixture_network()), frozen when the
/// fixture checkpoint was written.
inline constexpr std::uint64_t kFixtureHash = 0x83506ec1ec265177ULL;

std::vector<CheckResult> roundtrip_suite() {
  std::vector<CheckResult> out;
  const auto tmp = std::filesystem::temp_directory_path() / ("omnisr_selftest_" + std::to_string(::getpid()));
  std::filesystem::create_directories(tmp);
  SplitMix64 rng(77);

  {
    Image img(Shape{3, 9, 13});
    for (auto& v : img.values()) v = static_cast<float>(rng.next() % 256) / 255.0f;
    const auto path = (tmp / "rt.png").string();
    png_write(path, img);
    const auto back = png_read(path);
    out.push_back({"png_8bit", same_values(back, img), "9 x 13 RGB on the 8-bit grid is bit-exact"});
  }

  Config cfg;
  cfg.network = fixture_network();
  cfg.train.batch_size = 2;
  cfg.train.crop = 16;
  cfg.train.datasets = {"data/a", "data/b"};
  cfg.eval.datasets = {"bench/Set5"};
  cfg.io.output_dir = "runs/rt";
  Checkpoint ck;
  ck.config_text = serialize_config(cfg);
  ck.params = init_params<float>(cfg.network);
  OptimizerState opt;
  opt.iteration = 42;
  opt.rng_state = 0x1234567890abcdefULL;
  for (const auto& [name, t] : ck.params) {
    auto m = t.clone(), v = t.clone();
    for (auto& x : m.values()) x = static_cast<float>(rng.normal());
    for (auto& x : v.values()) x = static_cast<float>(rng.uniform());
    opt.m.emplace(name, m);
    opt.v.emplace(name, v);
  }
  ck.optimizer = opt;
  const auto path = (tmp / "rt.osr").string();
  {
    bool ok = false;
    std::string detail;
    try {
      checkpoint_save(path, ck);
      const auto back = checkpoint_load(path);
      ok = back.config_text == ck.config_text && back.params.size() == ck.params.size() && back.optimizer &&
           back.optimizer->iteration == 42 && back.optimizer->rng_state == opt.rng_state;
      for (const auto& [name, t] : ck.params) {
        ok = ok && same_values(back.params.at(name), t) && same_values(back.optimizer->m.at(name), opt.m.at(name)) &&
             same_values(back.optimizer->v.at(name), opt.v.at(name));
      }
      detail = std::to_string(ck.params.size()) + " tensors with optimizer state";
    } catch (const std::exception& e) {
      detail = e.what();
    }
    out.push_back({"checkpoint_exact", ok, detail});
  }
  {
    const auto bytes = read_file(path);
    bool ok = true;
    for (std::size_t cut : {bytes.size() - 1, bytes.size() / 2, std::size_t{12}}) {
      try {
        decode_checkpoint(bytes.substr(0, cut));
        ok = false;
      } catch (const ChecksumError&) {
      } catch (const std::exception&) {
        ok = false;
      }
    }
    out.push_back({"truncated_checksum_error", ok, "truncations raise a checksum error"});
  }
  {
    std::string bytes = read_file(path);
    bytes[4] = 2;  // version field follows the four-byte magic
    // Re-seal so the version, not the checksum, is what fails.
    bool ok = false;
    std::string detail;
    try {
      decode_checkpoint(reseal_checkpoint(bytes));
    } catch (const VersionError& e) {
      detail = e.what();
      ok = detail.find('2') != std::string::npos && detail.find('1') != std::string::npos;
    } catch (const std::exception& e) {
      detail = e.what();
    }
    out.push_back({"version_error", ok, detail});
  }
  {
    const bool ok = parse_config(serialize_config(cfg)) == cfg &&
                    serialize_config(parse_config(serialize_config(cfg))) == serialize_config(cfg);
    out.push_back({"config_text", ok, "parse(serialize(c)) == c"});
  }
  {
    const auto hash = param_hash(init_params<float>(fixture_network()));
    bool ok = hash == kFixtureHash;
    char buf[64];
    std::snprintf(buf, sizeof(buf), "init hash %016llx", static_cast<unsigned long long>(hash));
    std::string detail = buf;
    try {
      const auto fx = checkpoint_load(fixture_dir() + "/tiny_x2.osr");
      ok = ok && param_hash(fx.params) == kFixtureHash;
      detail += ", fixture checkpoint matches";
    } catch (const std::exception& e) {
      ok = false;
      detail += std::string(", fixture: ") + e.what();
    }
    out.push_back({"fixture_hash", ok, detail});
  }
  std::error_code ec;
  std::filesystem::remove_all(tmp, ec);
  return out;
}

}  // namespace omnisr::verify
