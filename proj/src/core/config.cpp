// Copyright (c) 2026 The codemae authors.
// SPDX-License-Identifier: Apache-2.0

#include "core/config.hpp"

#include <fstream>
#include <sstream>

#include "core/tensor.hpp"

namespace codemae::config {

using numcore::ErrorKind;
using numcore::fail;

namespace {
std::string trim(const std::string& s) {
  std::size_t a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  std::size_t b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}
}  // namespace

Config Config::from_file(const std::string& path) {
  std::ifstream f(path);
  if (!f) fail(ErrorKind::io, "cannot read config file: " + path);
  std::ostringstream buf;
  buf << f.rdbuf();
  return from_string(buf.str(), path);
}

Config Config::from_string(const std::string& text, const std::string& origin) {
  Config c;
  c.origin_ = origin;
  std::istringstream in(text);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    lineno++;
    auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    auto eq = line.find('=');
    if (eq == std::string::npos)
      fail(ErrorKind::usage, origin + ":" + std::to_string(lineno) +
                                 ": expected key=value, got '" + line + "'");
    std::string key = trim(line.substr(0, eq));
    std::string value = trim(line.substr(eq + 1));
    if (key.empty())
      fail(ErrorKind::usage,
           origin + ":" + std::to_string(lineno) + ": empty key");
    if (c.values_.count(key))
      fail(ErrorKind::usage, origin + ":" + std::to_string(lineno) +
                                 ": duplicate key '" + key + "'");
    c.values_[key] = value;
  }
  return c;
}

bool Config::has(const std::string& key) const { return values_.count(key) > 0; }

std::string Config::get_string(const std::string& key,
                               const std::string& fallback) {
  consumed_.insert(key);
  auto it = values_.find(key);
  return it == values_.end() ? fallback : it->second;
}

std::uint64_t Config::get_u64(const std::string& key, std::uint64_t fallback) {
  consumed_.insert(key);
  auto it = values_.find(key);
  if (it == values_.end()) return fallback;
  try {
    std::size_t pos = 0;
    std::uint64_t v = std::stoull(it->second, &pos);
    if (pos != it->second.size()) throw std::invalid_argument("");
    return v;
  } catch (const std::exception&) {
    fail(ErrorKind::usage, origin_ + ": key '" + key +
                               "' expects an unsigned integer, got '" +
                               it->second + "'");
  }
}

double Config::get_f64(const std::string& key, double fallback) {
  consumed_.insert(key);
  auto it = values_.find(key);
  if (it == values_.end()) return fallback;
  try {
    std::size_t pos = 0;
    double v = std::stod(it->second, &pos);
    if (pos != it->second.size()) throw std::invalid_argument("");
    return v;
  } catch (const std::exception&) {
    fail(ErrorKind::usage, origin_ + ": key '" + key +
                               "' expects a number, got '" + it->second + "'");
  }
}

bool Config::get_bool(const std::string& key, bool fallback) {
  consumed_.insert(key);
  auto it = values_.find(key);
  if (it == values_.end()) return fallback;
  const std::string& v = it->second;
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  fail(ErrorKind::usage, origin_ + ": key '" + key +
                             "' expects a boolean, got '" + v + "'");
}

void Config::set(const std::string& key, const std::string& value) {
  values_[key] = value;
}

void Config::finish() const {
  std::string unknown;
  for (const auto& [k, _] : values_)
    if (!consumed_.count(k)) unknown += (unknown.empty() ? "" : ", ") + k;
  if (!unknown.empty())
    fail(ErrorKind::usage, origin_ + ": unknown config keys: " + unknown);
}

std::string Config::render() const {
  std::string out;
  for (const auto& [k, v] : values_) out += k + "=" + v + "\n";
  return out;
}

}  // namespace codemae::config
