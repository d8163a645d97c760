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

// Regenerates tests/fixtures/tiny_x2.osr and prints its parameter hash.
// Usage: omnisr_make_fixture OUT.osr

#include <cstdio>

#include "omnisr/checkpoint.hpp"
#include "omnisr/config.hpp"

int main(int argc, char** argv) {
  using namespace omnisr;
  if (argc != 2) {
    std::fprintf(stderr, "usage: %s OUT.osr\n", argv[0]);
    return 2;
  }
  Config cfg;
  cfg.network.osag_count = 1;
  cfg.network.scale = 2;
  cfg.network.seed = 11;
  cfg.network.block.channels = 8;
  cfg.network.block.heads = 2;
  cfg.network.block.window = 4;
  Checkpoint ck;
  ck.config_text = serialize_config(cfg);
  ck.params = init_params<float>(cfg.network);
  checkpoint_save(argv[1], ck);
  std::printf("%016llx\n", static_cast<unsigned long long>(param_hash(ck.params)));
  return 0;
}
