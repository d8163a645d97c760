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

#include "verify/suites.hpp"

#include <chrono>
#include <cstdlib>
#include <exception>

namespace omnisr::verify {

const std::vector<Suite>& suites() {
  static const std::vector<Suite> all = {
      {"gradcheck", "analytic vs finite-difference gradients of every op and block", gradcheck_suite},
      {"attention", "attention operators vs literal-loop oracles", attention_suite},
      {"partition", "meso and global window partitions", partition_suite},
      {"receptive_field", "locality of Meso-OSA and reach of Global-OSA", receptive_field_suite},
      {"bicubic", "bicubic resampling vs direct 2-D sum", bicubic_suite},
      {"metrics", "PSNR and SSIM vs direct and Python references", metrics_suite},
      {"flops", "analytic MAC count vs instrumented forward pass", flops_suite},
      {"roundtrip", "PNG, checkpoint and config serialization", roundtrip_suite},
  };
  return all;
}

int run_selftest(const std::string& filter, std::ostream& out) {
  int failures = 0, ran = 0;
  for (const auto& s : suites()) {
    if (!filter.empty() && s.name.find(filter) == std::string::npos) continue;
    ++ran;
    const auto t0 = std::chrono::steady_clock::now();
    std::vector<CheckResult> results;
    try {
      results = s.run();
    } catch (const std::exception& e) {
      results.push_back({"uncaught_exception", false, e.what()});
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    int bad = 0;
    for (const auto& r : results) {
      out << (r.pass ? "  PASS " : "  FAIL ") << s.name << "/" << r.name << ": " << r.detail << "\n";
      if (!r.pass) ++bad;
    }
    out << (bad == 0 ? "PASS " : "FAIL ") << s.name << " (" << results.size() - bad << "/" << results.size()
        << " checks, " << secs << " s)\n";
    out.flush();
    failures += bad;
  }
  return ran == 0 ? -1 : failures;
}

std::string fixture_dir() {
  if (const char* env = std::getenv("OMNISR_FIXTURES")) return env;
  return OMNISR_SOURCE_DIR "/tests/fixtures";
}

}  // namespace omnisr::verify
