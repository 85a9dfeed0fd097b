// Copyright 2026 The ksdd Authors
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

#include "ksdd/types.hpp"

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

namespace ksdd {

/// Flat `key = value` configuration with dotted keys. Lines starting with
/// `#` are comments; blank lines are ignored; duplicate keys are an error.
/// Typed getters throw ConfigError on malformed values.
class Config {
 public:
  static Config parse(const std::string& text, const std::string& origin = "<string>");
  static Config load(const std::filesystem::path& path);

  bool has(const std::string& key) const;
  void set(const std::string& key, const std::string& value);

  std::string get_string(const std::string& key) const;
  std::string get_string(const std::string& key, const std::string& fallback) const;
  double get_double(const std::string& key) const;
  double get_double(const std::string& key, double fallback) const;
  int get_int(const std::string& key) const;
  int get_int(const std::string& key, int fallback) const;
  std::uint64_t get_u64(const std::string& key, std::uint64_t fallback) const;
  bool get_bool(const std::string& key, bool fallback) const;
  /// Comma-separated numbers.
  Vector get_vector(const std::string& key) const;
  Vector get_vector(const std::string& key, const Vector& fallback) const;
  /// Comma-separated words, trimmed.
  std::vector<std::string> get_list(const std::string& key, const std::vector<std::string>& fallback) const;

  /// Directory of the file the config was loaded from; relative paths in
  /// values resolve against it.
  const std::filesystem::path& base_dir() const { return base_dir_; }
  std::filesystem::path resolve(const std::filesystem::path& p) const;

  /// Keys never read by any getter, for typo detection.
  std::vector<std::string> unused_keys() const;
  const std::map<std::string, std::string>& entries() const { return values_; }

 private:
  const std::string& raw(const std::string& key) const;

  std::map<std::string, std::string> values_;
  std::string origin_;
  std::filesystem::path base_dir_;
  mutable std::set<std::string> used_;
};

}  // namespace ksdd
