// Copyright 2026 The fqfm Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <sstream>

#include "fqfm/training.hpp"

namespace fqfm {

struct CliConfig {
  NetworkConfig net;
  TrainConfig train;
};

namespace detail {

inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

inline std::vector<std::int64_t> parse_int_list(const std::string& key, const std::string& v) {
  std::vector<std::int64_t> out;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    char* end = nullptr;
    const long long n = std::strtoll(item.c_str(), &end, 10);
    FQFM_REQUIRE(!item.empty() && end == item.c_str() + item.size(), "config key ", key,
                 ": bad integer '", item, "'");
    out.push_back(n);
  }
  FQFM_REQUIRE(!out.empty(), "config key ", key, ": empty list");
  return out;
}

inline std::int64_t parse_int(const std::string& key, const std::string& v) {
  char* end = nullptr;
  const long long n = std::strtoll(v.c_str(), &end, 10);
  FQFM_REQUIRE(!v.empty() && end == v.c_str() + v.size(), "config key ", key, ": bad integer '", v,
               "'");
  return n;
}

inline double parse_double(const std::string& key, const std::string& v) {
  char* end = nullptr;
  const double d = std::strtod(v.c_str(), &end);
  FQFM_REQUIRE(!v.empty() && end == v.c_str() + v.size(), "config key ", key, ": bad number '", v,
               "'");
  return d;
}

}  // namespace detail

/// Applies one key=value assignment; unknown keys are rejected by name.
inline void apply_config_kv(CliConfig& cfg, const std::string& key, const std::string& value) {
  using namespace detail;
  if (key == "scales") cfg.net.scales = parse_int(key, value);
  else if (key == "enc_blocks") cfg.net.enc_blocks = parse_int_list(key, value);
  else if (key == "dec_blocks") cfg.net.dec_blocks = parse_int_list(key, value);
  else if (key == "base_channels") cfg.net.base_channels = parse_int(key, value);
  else if (key == "fsas_placement") cfg.net.fsas_placement = fsas_placement_from(value);
  else if (key == "ffn_variant") cfg.net.ffn_variant = ffn_variant_from(value);
  else if (key == "patch") cfg.net.patch = parse_int(key, value);
  else if (key == "expansion") cfg.net.expansion = parse_int(key, value);
  else if (key == "lr_max") cfg.train.lr_max = parse_double(key, value);
  else if (key == "lr_min") cfg.train.lr_min = parse_double(key, value);
  else if (key == "total_steps") cfg.train.total_steps = parse_int(key, value);
  else if (key == "batch") cfg.train.batch = parse_int(key, value);
  else if (key == "crop") cfg.train.crop = parse_int(key, value);
  else if (key == "lambda_freq") cfg.train.lambda_freq = parse_double(key, value);
  else if (key == "seed") cfg.train.seed = static_cast<std::uint64_t>(parse_int(key, value));
  else FQFM_REQUIRE(false, "unknown config key: ", key);
}

/// Flat key=value lines; '#' starts a comment; blank lines ignored.
inline void apply_config_text(CliConfig& cfg, std::istream& in, const std::string& origin) {
  std::string line;
  std::int64_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = detail::trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    FQFM_REQUIRE(eq != std::string::npos, origin, ":", lineno, ": expected key=value, got '", line,
                 "'");
    apply_config_kv(cfg, detail::trim(line.substr(0, eq)), detail::trim(line.substr(eq + 1)));
  }
}

inline CliConfig load_config_file(const std::string& path) {
  std::ifstream f(path);
  FQFM_REQUIRE(f.good(), "cannot open config file ", path);
  CliConfig cfg;
  apply_config_text(cfg, f, path);
  return cfg;
}

inline std::string join_int_list(const std::vector<std::int64_t>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) out += ",";
    out += std::to_string(v[i]);
  }
  return out;
}

/// Re-parseable key=value dump of the effective configuration.
inline std::string echo_config(const CliConfig& cfg) {
  char num[64];
  std::ostringstream out;
  out << "scales=" << cfg.net.scales << "\n";
  out << "enc_blocks=" << join_int_list(cfg.net.enc_blocks) << "\n";
  out << "dec_blocks=" << join_int_list(cfg.net.dec_blocks) << "\n";
  out << "base_channels=" << cfg.net.base_channels << "\n";
  out << "fsas_placement=" << to_string(cfg.net.fsas_placement) << "\n";
  out << "ffn_variant=" << to_string(cfg.net.ffn_variant) << "\n";
  out << "patch=" << cfg.net.patch << "\n";
  out << "expansion=" << cfg.net.expansion << "\n";
  std::snprintf(num, sizeof num, "%.17g", cfg.train.lr_max);
  out << "lr_max=" << num << "\n";
  std::snprintf(num, sizeof num, "%.17g", cfg.train.lr_min);
  out << "lr_min=" << num << "\n";
  out << "total_steps=" << cfg.train.total_steps << "\n";
  out << "batch=" << cfg.train.batch << "\n";
  out << "crop=" << cfg.train.crop << "\n";
  std::snprintf(num, sizeof num, "%.17g", cfg.train.lambda_freq);
  out << "lambda_freq=" << num << "\n";
  out << "seed=" << cfg.train.seed << "\n";
  return out.str();
}

}  // namespace fqfm
