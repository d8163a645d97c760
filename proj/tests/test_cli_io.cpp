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

#include <array>
#include <cstdio>
#include <filesystem>
#include <memory>
#include <string>

#include "omnisr/checkpoint.hpp"
#include "omnisr/config.hpp"
#include "omnisr/file_io.hpp"
#include "omnisr/png_io.hpp"
#include "verify/synthetic.hpp"

using namespace omnisr;

namespace fs = std::filesystem;

namespace {

fs::path scratch_dir(const std::string& name) {
  const auto dir = fs::temp_directory_path() / ("omnisr_test_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

struct Run {
  int code;
  std::string out;
};

/// Runs the CLI with `args`, capturing stdout and stderr.
Run cli(const std::string& args) {
  const std::string cmd = std::string(OMNISR_CLI) + " " + args + " 2>&1";
  std::unique_ptr<FILE, int (*)(FILE*)> pipe(popen(cmd.c_str(), "r"), pclose);
  REQUIRE(pipe);
  std::string out;
  std::array<char, 512> buf{};
  while (std::fgets(buf.data(), buf.size(), pipe.get())) out += buf.data();
  const int status = pclose(pipe.release());
  return {WEXITSTATUS(status), out};
}

Config tiny_config(int scale) {
  Config cfg;
  cfg.network.osag_count = 1;
  cfg.network.scale = scale;
  cfg.network.block.channels = 8;
  cfg.network.block.heads = 2;
  cfg.network.block.window = 8;
  return cfg;
}

}  // namespace

TEST_CASE("PNG: 2x2 pixels round trip exactly") {
  const auto dir = scratch_dir("png");
  Image img(Shape{3, 2, 2});
  const int px[4][3] = {{0, 0, 0}, {255, 255, 255}, {255, 0, 0}, {0, 0, 255}};
  for (int p = 0; p < 4; ++p) {
    for (int c = 0; c < 3; ++c) img[c * 4 + p] = static_cast<float>(px[p][c]) / 255.0f;
  }
  png_write((dir / "a.png").string(), img);
  CHECK(same_values(png_read((dir / "a.png").string()), img));

  const auto rnd = verify::synthetic_image(7, 23, 31);
  png_write((dir / "b.png").string(), rnd);
  const auto once = png_read((dir / "b.png").string());
  png_write((dir / "c.png").string(), once);
  CHECK(same_values(png_read((dir / "c.png").string()), once));
  CHECK(same_values(once, rnd));
}

TEST_CASE("PNG: byte rounding and grayscale expansion") {
  CHECK(to_byte(0.5f) == 128);
  CHECK(to_byte(-0.2f) == 0);
  CHECK(to_byte(1.7f) == 255);
  CHECK(to_byte(1.5f / 255.0f) == 2);
  const auto dir = scratch_dir("gray");
  Image gray(Shape{1, 3, 4});
  for (std::int64_t i = 0; i < gray.numel(); ++i) gray[i] = static_cast<float>(i * 20) / 255.0f;
  png_write((dir / "g.png").string(), gray);
  const auto rgb = png_read((dir / "g.png").string());
  REQUIRE(rgb.shape() == Shape{3, 3, 4});
  for (int c = 0; c < 3; ++c) {
    for (std::int64_t i = 0; i < 12; ++i) CHECK(rgb[c * 12 + i] == gray[i]);
  }
}

TEST_CASE("PNG: malformed input names the path") {
  const auto dir = scratch_dir("badpng");
  const auto path = (dir / "broken.png").string();
  write_file_atomic(path, "\x89PNG\r\n\x1a\n garbage");
  try {
    png_read(path);
    FAIL("expected an error");
  } catch (const IoError& e) {
    CHECK(std::string(e.what()).find("broken.png") != std::string::npos);
  }
}

TEST_CASE("config: round trip and defaults") {
  auto cfg = tiny_config(3);
  cfg.train.datasets = {"a/b", "c"};
  cfg.train.base_lr = 1.0 / 3.0;
  cfg.train.augment = AugmentLaw::dihedral;
  cfg.network.block.attention = AttentionKind::se_hybrid;
  const auto text = serialize_config(cfg);
  CHECK(parse_config(text) == cfg);
  CHECK(serialize_config(parse_config(text)) == text);

  const auto defaults = parse_config("");
  CHECK(defaults.network.osag_count == 5);
  CHECK(defaults.network.block.channels == 64);
  CHECK(defaults.network.block.window == 8);
  CHECK(defaults.train.base_lr == 5e-4);
  CHECK(defaults.train.batch_size == 64);
  CHECK(defaults.train.halve_every == 200000);
}

TEST_CASE("config: comments and whitespace") {
  const auto cfg = parse_config("# header\n[network]\n  scale = 2   ; trailing\nchannels=32 # c\n\n[train]\nseed = 9\n");
  CHECK(cfg.network.scale == 2);
  CHECK(cfg.network.block.channels == 32);
  CHECK(cfg.train.seed == 9);
}

TEST_CASE("config: rejected input") {
  CHECK_THROWS_AS(parse_config("[network]\nchanels = 8\n"), ConfigError);
  CHECK_THROWS_AS(parse_config("[nets]\n"), ConfigError);
  CHECK_THROWS_AS(parse_config("[network]\nscale = 2\nscale = 3\n"), ConfigError);
  CHECK_THROWS_AS(parse_config("scale = 2\n"), ConfigError);
  CHECK_THROWS_AS(parse_config("[network]\nattention = full\n"), ConfigError);
  CHECK_THROWS_AS(parse_config("[network]\nscale = 4x\n"), ConfigError);
  CHECK_THROWS_AS(parse_config("[network]\nscale = 5\n"), ConfigError);
  CHECK_THROWS_AS(parse_config("[network]\nchannels = 30\nheads = 4\n"), ConfigError);
  try {
    parse_config("[train]\nbogus = 1\n", "my.cfg");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find("my.cfg") != std::string::npos);
    CHECK(std::string(e.what()).find("bogus") != std::string::npos);
  }
}

TEST_CASE("checkpoint: round trip, truncation, corruption") {
  const auto dir = scratch_dir("ckpt");
  const auto cfg = tiny_config(2);
  Checkpoint ck;
  ck.config_text = serialize_config(cfg);
  ck.params = init_params<float>(cfg.network);
  const auto path = (dir / "m.osr").string();
  checkpoint_save(path, ck);
  const auto back = checkpoint_load(path);
  CHECK(back.config_text == ck.config_text);
  CHECK_FALSE(back.optimizer.has_value());
  CHECK(param_hash(back.params) == param_hash(ck.params));
  for (const auto& [name, t] : ck.params) CHECK(same_values(back.params.at(name), t));

  auto bytes = read_file(path);
  CHECK_THROWS_AS(decode_checkpoint(bytes.substr(0, bytes.size() - 10)), ChecksumError);
  bytes[bytes.size() / 2] ^= 0x40;
  CHECK_THROWS_AS(decode_checkpoint(bytes), ChecksumError);
  CHECK_THROWS_AS(decode_checkpoint(std::string("JUNKJUNKJUNK")), IoError);
  CHECK(fs::exists(path));
  CHECK(std::distance(fs::directory_iterator(dir), fs::directory_iterator{}) == 1);  // no temp files left
}

TEST_CASE("param_hash notices a single flipped bit") {
  auto p = init_params<float>(tiny_config(2).network);
  const auto h = param_hash(p);
  auto& t = p.begin()->second;
  t[0] = std::nextafter(t[0], 1.0f);
  CHECK(param_hash(p) != h);
}

TEST_CASE("CLI: count, infer and exit codes") {
  const auto dir = scratch_dir("cli");
  const auto cfg_path = (dir / "tiny.cfg").string();
  auto cfg = tiny_config(4);
  write_file_atomic(cfg_path, serialize_config(cfg));

  const auto count = cli("count --config " + cfg_path + " --flops-res 64x48");
  CHECK(count.code == 0);
  CHECK(count.out.find("params " + std::to_string(count_params(cfg.network))) != std::string::npos);
  CHECK(count.out.find("flops " + std::to_string(count_flops(cfg.network, 64, 48))) != std::string::npos);

  Checkpoint ck;
  ck.config_text = serialize_config(cfg);
  ck.params = init_params<float>(cfg.network);
  const auto ckpt = (dir / "x4.osr").string();
  checkpoint_save(ckpt, ck);
  const auto in = (dir / "in.png").string(), out = (dir / "out.png").string();
  png_write(in, verify::synthetic_image(3, 64, 64));
  const auto infer = cli("infer --ckpt " + ckpt + " --input " + in + " --output " + out);
  CHECK(infer.code == 0);
  REQUIRE(fs::exists(out));
  CHECK(png_read(out).shape() == Shape{3, 256, 256});

  CHECK(cli("").code == 2);
  CHECK(cli("count").code == 2);
  CHECK(cli("count --config " + cfg_path + " --flops-res wide").code == 2);
  CHECK(cli("infer --ckpt " + ckpt + " --input " + in).code == 2);
  CHECK(cli("frobnicate").code == 2);
  CHECK(cli("eval --ckpt " + ckpt + " --dataset " + dir.string() + " --scale 2").code == 1);
  CHECK(cli("infer --ckpt " + cfg_path + " --input " + in + " --output " + out).code == 1);
  CHECK(cli("--help").code == 0);
}
