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

#include "omnisr/checkpoint.hpp"

#include <zlib.h>

#include <algorithm>
#include <bit>
#include <cstring>

#include "omnisr/file_io.hpp"

namespace omnisr {

namespace {

constexpr char kMagic[4] = {'O', 'S', 'R', '1'};

class Writer {
 public:
  void bytes(const void* p, std::size_t n) { out_.append(static_cast<const char*>(p), n); }
  void u8(std::uint8_t v) { out_.push_back(static_cast<char>(v)); }
  void u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) u8(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void u64(std::uint64_t v) {
    for (int i = 0; i < 8; ++i) u8(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void str(const std::string& s) {
    u32(static_cast<std::uint32_t>(s.size()));
    bytes(s.data(), s.size());
  }
  void record(const std::string& name, const Tensor<float>& t) {
    str(name);
    u32(static_cast<std::uint32_t>(t.rank()));
    for (auto d : t.shape()) u64(static_cast<std::uint64_t>(d));
    for (float f : t.values()) u32(std::bit_cast<std::uint32_t>(f));
  }
  void records(const ModelParams<float>& params) {
    u32(static_cast<std::uint32_t>(params.size()));
    for (const auto& [name, t] : params) record(name, t);
  }
  std::string& buffer() { return out_; }

 private:
  std::string out_;
};

class Reader {
 public:
  Reader(const std::string& bytes, std::size_t end, std::string origin)
      : p_(reinterpret_cast<const unsigned char*>(bytes.data())), end_(end), origin_(std::move(origin)) {}

  void need(std::size_t n) {
    if (end_ - pos_ < n) throw IoError(origin_ + ": checkpoint record runs past end of payload");
  }
  std::uint8_t u8() {
    need(1);
    return p_[pos_++];
  }
  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(p_[pos_ + i]) << (8 * i);
    pos_ += 4;
    return v;
  }
  std::uint64_t u64() {
    need(8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(p_[pos_ + i]) << (8 * i);
    pos_ += 8;
    return v;
  }
  std::string str(std::size_t n) {
    need(n);
    std::string s(reinterpret_cast<const char*>(p_ + pos_), n);
    pos_ += n;
    return s;
  }
  ModelParams<float> records() {
    ModelParams<float> out;
    const std::uint32_t count = u32();
    for (std::uint32_t r = 0; r < count; ++r) {
      std::string name = str(u32());
      const std::uint32_t rank = u32();
      if (rank == 0 || rank > 8) throw IoError(origin_ + ": bad rank for " + name);
      Shape shape(rank);
      std::uint64_t n = 1;
      for (auto& d : shape) {
        const std::uint64_t v = u64();
        if (v == 0 || v > (1ULL << 32)) throw IoError(origin_ + ": bad extent for " + name);
        d = static_cast<std::int64_t>(v);
        n *= v;
      }
      need(n * 4);
      std::vector<float> data(n);
      for (auto& f : data) f = std::bit_cast<float>(u32());
      out.emplace(std::move(name), Tensor<float>(std::move(shape), std::move(data)));
    }
    return out;
  }
  bool done() const { return pos_ == end_; }

 private:
  const unsigned char* p_;
  std::size_t end_;
  std::size_t pos_ = 0;
  std::string origin_;
};

std::uint32_t crc_of(const std::string& bytes, std::size_t n) {
  uLong crc = crc32(0L, Z_NULL, 0);
  // zlib takes 32-bit lengths; feed in chunks.
  const auto* p = reinterpret_cast<const Bytef*>(bytes.data());
  while (n > 0) {
    const auto chunk = static_cast<uInt>(std::min<std::size_t>(n, 1u << 30));
    crc = crc32(crc, p, chunk);
    p += chunk;
    n -= chunk;
  }
  return static_cast<std::uint32_t>(crc);
}

}  // namespace

std::string encode_checkpoint(const Checkpoint& ckpt) {
  Writer w;
  w.bytes(kMagic, 4);
  w.u32(kCheckpointVersion);
  w.u64(ckpt.config_text.size());
  w.bytes(ckpt.config_text.data(), ckpt.config_text.size());
  w.records(ckpt.params);
  w.u8(ckpt.optimizer ? 1 : 0);
  if (ckpt.optimizer) {
    w.u64(static_cast<std::uint64_t>(ckpt.optimizer->iteration));
    w.u64(ckpt.optimizer->rng_state);
    w.records(ckpt.optimizer->m);
    w.records(ckpt.optimizer->v);
  }
  w.u32(crc_of(w.buffer(), w.buffer().size()));
  return std::move(w.buffer());
}

Checkpoint decode_checkpoint(const std::string& bytes, const std::string& origin) {
  if (bytes.size() < 4 || std::memcmp(bytes.data(), kMagic, 4) != 0) {
    throw IoError(origin + ": not an OSR1 checkpoint (bad magic)");
  }
  if (bytes.size() < 12) throw ChecksumError(origin + ": checkpoint truncated");
  const std::size_t payload = bytes.size() - 4;
  const auto* tail = reinterpret_cast<const unsigned char*>(bytes.data()) + payload;
  std::uint32_t stored = 0;
  for (int i = 0; i < 4; ++i) stored |= static_cast<std::uint32_t>(tail[i]) << (8 * i);
  const std::uint32_t actual = crc_of(bytes, payload);
  if (stored != actual) {
    throw ChecksumError(origin + ": checkpoint checksum mismatch (file corrupt or truncated)");
  }
  Reader r(bytes, payload, origin);
  r.str(4);
  const std::uint32_t version = r.u32();
  if (version != kCheckpointVersion) {
    throw VersionError(origin + ": checkpoint version " + std::to_string(version) +
                       " is not supported by this build (expects version " + std::to_string(kCheckpointVersion) +
                       ")");
  }
  Checkpoint ckpt;
  ckpt.config_text = r.str(r.u64());
  ckpt.params = r.records();
  if (r.u8() != 0) {
    OptimizerState st;
    st.iteration = static_cast<std::int64_t>(r.u64());
    st.rng_state = r.u64();
    st.m = r.records();
    st.v = r.records();
    ckpt.optimizer = std::move(st);
  }
  if (!r.done()) throw IoError(origin + ": trailing bytes after checkpoint payload");
  return ckpt;
}

void checkpoint_save(const std::string& path, const Checkpoint& ckpt) {
  write_file_atomic(path, encode_checkpoint(ckpt));
}

Checkpoint checkpoint_load(const std::string& path) { return decode_checkpoint(read_file(path), path); }

std::uint64_t param_hash(const ModelParams<float>& params) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  auto mix = [&h](const void* p, std::size_t n) {
    const auto* b = static_cast<const unsigned char*>(p);
    for (std::size_t i = 0; i < n; ++i) {
      h ^= b[i];
      h *= 0x100000001b3ULL;
    }
  };
  for (const auto& [name, t] : params) {
    mix(name.data(), name.size());
    for (auto d : t.shape()) {
      const auto le = static_cast<std::uint64_t>(d);
      for (int i = 0; i < 8; ++i) {
        const auto byte = static_cast<unsigned char>(le >> (8 * i));
        mix(&byte, 1);
      }
    }
    for (float f : t.values()) {
      const std::uint32_t bits = std::bit_cast<std::uint32_t>(f);
      for (int i = 0; i < 4; ++i) {
        const auto byte = static_cast<unsigned char>(bits >> (8 * i));
        mix(&byte, 1);
      }
    }
  }
  return h;
}

}  // namespace omnisr
