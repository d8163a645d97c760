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

#include "omnisr/config.hpp"

#include <charconv>
#include <cstdio>
#include <functional>
#include <sstream>

#include "omnisr/file_io.hpp"

namespace omnisr {

namespace {

std::string_view trim(std::string_view s) {
  const auto* ws = " \t\r\n";
  const auto b = s.find_first_not_of(ws);
  if (b == std::string_view::npos) return {};
  return s.substr(b, s.find_last_not_of(ws) - b + 1);
}

template <typename Int>
void parse_int(std::string_view v, Int& out, const std::string& where) {
  Int tmp{};
  auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), tmp);
  if (ec != std::errc() || ptr != v.data() + v.size()) {
    throw ConfigError(where + ": expected an integer, got '" + std::string(v) + "'");
  }
  out = tmp;
}

void parse_value(std::string_view v, std::int64_t& out, const std::string& where) { parse_int(v, out, where); }
void parse_value(std::string_view v, int& out, const std::string& where) { parse_int(v, out, where); }
void parse_value(std::string_view v, std::uint64_t& out, const std::string& where) { parse_int(v, out, where); }

void parse_value(std::string_view v, double& out, const std::string& where) {
  double tmp = 0.0;
  auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), tmp);
  if (ec != std::errc() || ptr != v.data() + v.size()) {
    throw ConfigError(where + ": expected a number, got '" + std::string(v) + "'");
  }
  out = tmp;
}

void parse_value(std::string_view v, std::string& out, const std::string&) { out = std::string(v); }

void parse_value(std::string_view v, std::vector<std::string>& out, const std::string&) {
  out.clear();
  while (!v.empty()) {
    const auto comma = v.find(',');
    const auto item = trim(v.substr(0, comma));
    if (!item.empty()) out.emplace_back(item);
    if (comma == std::string_view::npos) break;
    v.remove_prefix(comma + 1);
  }
}

template <typename Enum, std::size_t N>
void parse_enum(std::string_view v, Enum& out, const std::pair<const char*, Enum> (&names)[N],
                const std::string& where) {
  std::string allowed;
  for (const auto& [name, value] : names) {
    if (v == name) {
      out = value;
      return;
    }
    allowed += allowed.empty() ? name : std::string("|") + name;
  }
  throw ConfigError(where + ": expected one of " + allowed + ", got '" + std::string(v) + "'");
}

template <typename Enum, std::size_t N>
std::string enum_name(Enum e, const std::pair<const char*, Enum> (&names)[N]) {
  for (const auto& [name, value] : names) {
    if (value == e) return name;
  }
  return "?";
}

constexpr std::pair<const char*, AttentionKind> kAttention[] = {{"omni", AttentionKind::omni},
                                                                 {"spatial_only", AttentionKind::spatial_only},
                                                                 {"channel_only", AttentionKind::channel_only},
                                                                 {"se_hybrid", AttentionKind::se_hybrid}};
constexpr std::pair<const char*, ChannelInputs> kInputs[] = {{"copy", ChannelInputs::copy},
                                                              {"embed", ChannelInputs::embed}};
constexpr std::pair<const char*, InitScheme> kInit[] = {{"standard", InitScheme::standard},
                                                         {"skip_dominant", InitScheme::skip_dominant}};
constexpr std::pair<const char*, AugmentLaw> kAugment[] = {
    {"none", AugmentLaw::none}, {"flip_rotate", AugmentLaw::flip_rotate}, {"dihedral", AugmentLaw::dihedral}};

void parse_value(std::string_view v, AttentionKind& out, const std::string& w) { parse_enum(v, out, kAttention, w); }
void parse_value(std::string_view v, ChannelInputs& out, const std::string& w) { parse_enum(v, out, kInputs, w); }
void parse_value(std::string_view v, InitScheme& out, const std::string& w) { parse_enum(v, out, kInit, w); }
void parse_value(std::string_view v, AugmentLaw& out, const std::string& w) { parse_enum(v, out, kAugment, w); }

template <typename Int>
std::enable_if_t<std::is_integral_v<Int>, std::string> format_value(Int v) {
  return std::to_string(v);
}

std::string format_value(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

std::string format_value(const std::string& v) { return v; }

std::string format_value(const std::vector<std::string>& v) {
  std::string out;
  for (const auto& s : v) out += out.empty() ? s : ", " + s;
  return out;
}

std::string format_value(AttentionKind v) { return enum_name(v, kAttention); }
std::string format_value(ChannelInputs v) { return enum_name(v, kInputs); }
std::string format_value(InitScheme v) { return enum_name(v, kInit); }
std::string format_value(AugmentLaw v) { return enum_name(v, kAugment); }

struct Field {
  std::string section;
  std::string key;
  std::function<void(Config&, std::string_view, const std::string&)> set;
  std::function<std::string(const Config&)> get;
};

template <typename Access>
Field field(const char* section, const char* key, Access access) {
  return {section, key,
          [access](Config& c, std::string_view v, const std::string& where) { parse_value(v, access(c), where); },
          [access](const Config& c) { return format_value(access(const_cast<Config&>(c))); }};
}

const std::vector<Field>& fields() {
  static const std::vector<Field> table = {
      field("network", "osag_count", [](Config& c) -> auto& { return c.network.osag_count; }),
      field("network", "channels", [](Config& c) -> auto& { return c.network.block.channels; }),
      field("network", "scale", [](Config& c) -> auto& { return c.network.scale; }),
      field("network", "in_channels", [](Config& c) -> auto& { return c.network.in_channels; }),
      field("network", "heads", [](Config& c) -> auto& { return c.network.block.heads; }),
      field("network", "window", [](Config& c) -> auto& { return c.network.block.window; }),
      field("network", "ffn_expansion", [](Config& c) -> auto& { return c.network.block.ffn_expansion; }),
      field("network", "ffn_hidden", [](Config& c) -> auto& { return c.network.block.ffn_hidden_override; }),
      field("network", "lcb_expansion", [](Config& c) -> auto& { return c.network.block.lcb_expansion; }),
      field("network", "lcb_depth", [](Config& c) -> auto& { return c.network.block.lcb_depth; }),
      field("network", "se_reduction", [](Config& c) -> auto& { return c.network.block.se_reduction; }),
      field("network", "esa_reduction", [](Config& c) -> auto& { return c.network.block.esa_reduction; }),
      field("network", "attention", [](Config& c) -> auto& { return c.network.block.attention; }),
      field("network", "channel_inputs", [](Config& c) -> auto& { return c.network.block.channel_inputs; }),
      field("network", "init", [](Config& c) -> auto& { return c.network.init; }),
      field("network", "seed", [](Config& c) -> auto& { return c.network.seed; }),
      field("train", "batch_size", [](Config& c) -> auto& { return c.train.batch_size; }),
      field("train", "total_iters", [](Config& c) -> auto& { return c.train.total_iters; }),
      field("train", "base_lr", [](Config& c) -> auto& { return c.train.base_lr; }),
      field("train", "halve_every", [](Config& c) -> auto& { return c.train.halve_every; }),
      field("train", "crop", [](Config& c) -> auto& { return c.train.crop; }),
      field("train", "weight_decay", [](Config& c) -> auto& { return c.train.weight_decay; }),
      field("train", "beta1", [](Config& c) -> auto& { return c.train.beta1; }),
      field("train", "beta2", [](Config& c) -> auto& { return c.train.beta2; }),
      field("train", "eps", [](Config& c) -> auto& { return c.train.eps; }),
      field("train", "seed", [](Config& c) -> auto& { return c.train.seed; }),
      field("train", "datasets", [](Config& c) -> auto& { return c.train.datasets; }),
      field("train", "augment", [](Config& c) -> auto& { return c.train.augment; }),
      field("train", "log_every", [](Config& c) -> auto& { return c.train.log_every; }),
      field("train", "checkpoint_every", [](Config& c) -> auto& { return c.train.checkpoint_every; }),
      field("train", "prefetch", [](Config& c) -> auto& { return c.train.prefetch; }),
      field("eval", "datasets", [](Config& c) -> auto& { return c.eval.datasets; }),
      field("eval", "tile", [](Config& c) -> auto& { return c.eval.tile; }),
      field("eval", "overlap", [](Config& c) -> auto& { return c.eval.overlap; }),
      field("io", "output_dir", [](Config& c) -> auto& { return c.io.output_dir; }),
  };
  return table;
}

}  // namespace

void Config::validate() const {
  network.validate();
  train.validate(network.block.window);
  if (eval.tile <= 0 || eval.overlap < 0 || eval.overlap >= eval.tile) {
    throw ConfigError("eval: need tile > overlap >= 0");
  }
}

Config parse_config(std::string_view text, const std::string& origin) {
  Config cfg;
  std::string section;
  std::vector<std::string> seen;
  std::size_t line_no = 0;
  while (!text.empty()) {
    const auto nl = text.find('\n');
    std::string_view line = text.substr(0, nl);
    text.remove_prefix(nl == std::string_view::npos ? text.size() : nl + 1);
    ++line_no;
    const std::string where = origin + ":" + std::to_string(line_no);
    const auto comment = line.find_first_of("#;");
    line = trim(line.substr(0, comment));
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') throw ConfigError(where + ": malformed section header");
      section = std::string(trim(line.substr(1, line.size() - 2)));
      if (section != "network" && section != "train" && section != "eval" && section != "io") {
        throw ConfigError(where + ": unknown section [" + section + "]");
      }
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) throw ConfigError(where + ": expected key = value");
    if (section.empty()) throw ConfigError(where + ": key outside of any section");
    const std::string key(trim(line.substr(0, eq)));
    const std::string_view value = trim(line.substr(eq + 1));
    const std::string qualified = section + "." + key;
    bool found = false;
    for (const auto& f : fields()) {
      if (f.section == section && f.key == key) {
        for (const auto& s : seen) {
          if (s == qualified) throw ConfigError(where + ": duplicate key " + qualified);
        }
        seen.push_back(qualified);
        f.set(cfg, value, where + " (" + qualified + ")");
        found = true;
        break;
      }
    }
    if (!found) throw ConfigError(where + ": unknown key '" + key + "' in [" + section + "]");
  }
  try {
    cfg.validate();
  } catch (const ConfigError& e) {
    throw ConfigError(origin + ": " + e.what());
  }
  return cfg;
}

Config load_config(const std::string& path) { return parse_config(read_file(path), path); }

std::string serialize_config(const Config& cfg) {
  std::ostringstream os;
  std::string section;
  for (const auto& f : fields()) {
    if (f.section != section) {
      if (!section.empty()) os << '\n';
      section = f.section;
      os << '[' << section << "]\n";
    }
    os << f.key << " = " << f.get(cfg) << '\n';
  }
  return os.str();
}

std::string config_fingerprint(const Config& cfg) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(fnv1a(serialize_config(cfg))));
  return buf;
}

std::string to_string(AttentionKind k) { return format_value(k); }
std::string to_string(AugmentLaw a) { return format_value(a); }

}  // namespace omnisr
