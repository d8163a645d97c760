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

// omnisr: train, evaluate, run and inspect Omni-SR models.
// Flags are frozen; see docs/cli.md.

#include <cstdio>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "omnisr/checkpoint.hpp"
#include "omnisr/config.hpp"
#include "omnisr/evalkit.hpp"
#include "omnisr/png_io.hpp"
#include "verify/suites.hpp"

namespace {

using namespace omnisr;

struct Resolution {
  std::int64_t w = 1280;
  std::int64_t h = 720;
};

Resolution parse_resolution(const std::string& text) {
  const auto x = text.find_first_of("xX");
  Resolution r;
  try {
    std::size_t used = 0;
    if (x == std::string::npos) throw std::invalid_argument(text);
    r.w = std::stoll(text.substr(0, x), &used);
    if (used != x) throw std::invalid_argument(text);
    r.h = std::stoll(text.substr(x + 1), &used);
    if (used != text.size() - x - 1) throw std::invalid_argument(text);
  } catch (const std::exception&) {
    throw UsageError("--flops-res expects WxH, got '" + text + "'");
  }
  if (r.w <= 0 || r.h <= 0) throw UsageError("--flops-res extents must be positive");
  return r;
}

struct LoadedModel {
  Config cfg;
  ModelParams<float> params;
};

LoadedModel load_model(const std::string& path) {
  auto ck = checkpoint_load(path);
  LoadedModel m{parse_config(ck.config_text, path + " (embedded config)"), std::move(ck.params)};
  const auto expected = network_layout(m.cfg.network);
  for (const auto& spec : expected.specs()) {
    const auto it = m.params.find(spec.name);
    if (it == m.params.end() || it->second.shape() != spec.shape) {
      throw IoError(path + ": parameter " + spec.name + " missing or misshapen for the embedded config");
    }
  }
  return m;
}

int cmd_train(const std::string& config_path, const std::string& resume) {
  const Config cfg = load_config(config_path);
  const auto data = Dataset::from_directories(cfg.train.datasets, cfg.network.scale, cfg.train.crop);
  std::cout << "training on " << data.size() << " images, " << count_params(cfg.network) << " parameters, "
            << "output " << cfg.io.output_dir << std::endl;
  const auto state = train_loop(cfg, data, resume, &std::cout);
  std::cout << "finished at iteration " << state.iteration << "; checkpoint " << cfg.io.output_dir << "/last.osr"
            << std::endl;
  return 0;
}

int cmd_eval(const std::string& ckpt, const std::string& dataset, int scale) {
  const auto m = load_model(ckpt);
  if (m.cfg.network.scale != scale) {
    throw ConfigError(ckpt + ": checkpoint is x" + std::to_string(m.cfg.network.scale) + ", --scale is " +
                      std::to_string(scale));
  }
  const auto model = network_model(m.params, m.cfg.network, m.cfg.eval.tile, m.cfg.eval.overlap);
  const auto report = run_benchmark(model, dataset, scale, config_fingerprint(m.cfg));
  std::cout << report.to_text();
  return report.images.empty() ? 1 : 0;
}

int cmd_infer(const std::string& ckpt, const std::string& input, const std::string& output) {
  const auto m = load_model(ckpt);
  const auto lr = png_read(input);
  const auto model = network_model(m.params, m.cfg.network, m.cfg.eval.tile, m.cfg.eval.overlap);
  const auto sr = model(lr, lr);
  png_write(output, sr);
  std::cout << input << " " << lr.dim(2) << "x" << lr.dim(1) << " -> " << output << " " << sr.dim(2) << "x"
            << sr.dim(1) << std::endl;
  return 0;
}

int cmd_count(const std::string& config_path, const std::string& res_text) {
  const Config cfg = load_config(config_path);
  const auto res = parse_resolution(res_text);
  const auto params = count_params(cfg.network);
  const auto flops = count_flops(cfg.network, res.w, res.h);
  std::printf("params %lld (%.1fK)\n", static_cast<long long>(params), static_cast<double>(params) / 1e3);
  std::printf("flops %llu (%.2fG) at %lldx%lld output, x%d\n", static_cast<unsigned long long>(flops),
              static_cast<double>(flops) / 1e9, static_cast<long long>(res.w), static_cast<long long>(res.h),
              cfg.network.scale);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Omni-SR super-resolution toolkit"};
  app.require_subcommand(1);

  std::string config, resume, ckpt, dataset, input, output, flops_res = "1280x720", filter;
  int scale = 0;

  auto* train = app.add_subcommand("train", "Train a model from a config file");
  train->add_option("--config", config, "INI config file")->required()->check(CLI::ExistingFile);
  train->add_option("--resume", resume, "Checkpoint to resume from")->check(CLI::ExistingFile);

  auto* eval = app.add_subcommand("eval", "Benchmark a checkpoint on a directory of HR PNGs");
  eval->add_option("--ckpt", ckpt, "Checkpoint file")->required()->check(CLI::ExistingFile);
  eval->add_option("--dataset", dataset, "Directory of HR PNGs")->required()->check(CLI::ExistingDirectory);
  eval->add_option("--scale", scale, "Upscaling factor")->required()->check(CLI::Range(2, 4));

  auto* infer = app.add_subcommand("infer", "Upscale one PNG");
  infer->add_option("--ckpt", ckpt, "Checkpoint file")->required()->check(CLI::ExistingFile);
  infer->add_option("--input", input, "Low-resolution PNG")->required()->check(CLI::ExistingFile);
  infer->add_option("--output", output, "Output PNG")->required();

  auto* count = app.add_subcommand("count", "Print parameter and FLOP totals of a config");
  count->add_option("--config", config, "INI config file")->required()->check(CLI::ExistingFile);
  count->add_option("--flops-res", flops_res, "Output resolution WxH for the FLOP count")->capture_default_str();

  auto* selftest = app.add_subcommand("selftest", "Run the built-in verification suites");
  selftest->add_option("--filter", filter, "Only suites whose name contains NAME");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);
    std::cerr << "error: " << e.what() << "\n\n" << app.help();
    return 2;
  }

  try {
    if (*train) return cmd_train(config, resume);
    if (*eval) return cmd_eval(ckpt, dataset, scale);
    if (*infer) return cmd_infer(ckpt, input, output);
    if (*count) return cmd_count(config, flops_res);
    if (*selftest) {
      const int failures = omnisr::verify::run_selftest(filter, std::cout);
      if (failures < 0) {
        std::cerr << "error: no suite matches '" << filter << "'\n\n" << selftest->help();
        return 2;
      }
      std::cout << (failures == 0 ? "selftest passed" : "selftest FAILED: " + std::to_string(failures) + " checks")
                << std::endl;
      return failures == 0 ? 0 : 1;
    }
  } catch (const omnisr::UsageError& e) {
    std::cerr << "error: " << e.what() << "\n\n" << app.help();
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << std::endl;
    return 1;
  }
  return 2;
}
