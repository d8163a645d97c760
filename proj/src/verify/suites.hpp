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

#pragma once

// Self-verification suites behind `omnisr selftest` and the test binaries.

#include <functional>
#include <ostream>
#include <string>
#include <vector>

namespace omnisr::verify {

struct CheckResult {
  std::string name;
  bool pass = false;
  std::string detail;
};

struct Suite {
  std::string name;
  std::string summary;
  std::function<std::vector<CheckResult>()> run;
};

/// gradcheck, attention, partition, receptive_field, bicubic, metrics,
/// flops, roundtrip.
const std::vector<Suite>& suites();

std::vector<CheckResult> gradcheck_suite();
std::vector<CheckResult> attention_suite();
std::vector<CheckResult> partition_suite();
std::vector<CheckResult> receptive_field_suite();
std::vector<CheckResult> bicubic_suite();
std::vector<CheckResult> metrics_suite();
std::vector<CheckResult> flops_suite();
std::vector<CheckResult> roundtrip_suite();

/// Runs every suite whose name contains `filter` (all when empty), printing
/// one line per check. Returns the number of failed checks, or -1 when the
/// filter matches no suite.
int run_selftest(const std::string& filter, std::ostream& out);

/// Directory holding the committed test fixtures.
std::string fixture_dir();

}  // namespace omnisr::verify
