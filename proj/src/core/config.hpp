// Copyright (c) 2026 The codemae authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <map>
#include <set>
#include <string>

namespace codemae::config {

// Flat key=value text config. '#' starts a comment; blank lines are
// ignored; duplicate keys are a usage error. Every key must be consumed by
// a typed getter before finish(), so typos surface as unknown-key errors.
class Config {
 public:
  static Config from_file(const std::string& path);
  static Config from_string(const std::string& text,
                            const std::string& origin = "<string>");

  bool has(const std::string& key) const;
  std::string get_string(const std::string& key, const std::string& fallback);
  std::uint64_t get_u64(const std::string& key, std::uint64_t fallback);
  double get_f64(const std::string& key, double fallback);
  bool get_bool(const std::string& key, bool fallback);

  // Set (or override) a value programmatically, e.g. from CLI flags.
  void set(const std::string& key, const std::string& value);

  // Usage error naming every key no getter asked for.
  void finish() const;

  // Deterministic key=value snapshot of everything present (sorted keys).
  std::string render() const;

 private:
  std::map<std::string, std::string> values_;
  std::set<std::string> consumed_;
  std::string origin_;
};

}  // namespace codemae::config
