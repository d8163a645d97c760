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

#include <cstdint>

namespace omnisr {

namespace detail {
inline std::uint64_t& mac_counter() {
  thread_local std::uint64_t count = 0;
  return count;
}
}  // namespace detail

/// Forward kernels that perform multiply-accumulates (convolutions and
/// matrix products) report them here. Backward passes do not count.
inline void count_macs(std::uint64_t n) { detail::mac_counter() += n; }

/// Measures the multiply-accumulates executed on this thread while alive.
class MacCountScope {
 public:
  MacCountScope() : start_(detail::mac_counter()) {}
  std::uint64_t count() const { return detail::mac_counter() - start_; }

 private:
  std::uint64_t start_;
};

}  // namespace omnisr
