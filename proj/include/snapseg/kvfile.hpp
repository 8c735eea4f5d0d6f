// SPDX-FileCopyrightText: 2026 The snapseg Authors
// SPDX-License-Identifier: Apache-2.0

#ifndef SNAPSEG_KVFILE_HPP
#define SNAPSEG_KVFILE_HPP

#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace snapseg {

/// Flat "key = value" text. '#' starts a comment; blank lines are ignored.
/// Later assignments to the same key win.
class KeyValues {
 public:
  static KeyValues parse(const std::string& text);
  static KeyValues load(const std::string& path);

  void set(const std::string& key, const std::string& value) { values_[key] = value; }
  bool has(const std::string& key) const { return values_.count(key) != 0; }
  const std::map<std::string, std::string>& entries() const { return values_; }

  std::string get_string(const std::string& key, const std::string& fallback) const;
  double get_double(const std::string& key, double fallback) const;
  long long get_int(const std::string& key, long long fallback) const;
  std::uint64_t get_uint64(const std::string& key, std::uint64_t fallback) const;
  bool get_bool(const std::string& key, bool fallback) const;
  std::vector<int> get_int_list(const std::string& key, const std::vector<int>& fallback) const;
  std::vector<double> get_double_list(const std::string& key, const std::vector<double>& fallback) const;

  std::string to_text() const;
  void save(const std::string& path) const;

 private:
  std::map<std::string, std::string> values_;
};

/// Comma or whitespace separated numbers.
std::vector<int> parse_int_list(const std::string& text);
std::vector<double> parse_double_list(const std::string& text);

std::string format_double(double v);

}  // namespace snapseg

#endif  // SNAPSEG_KVFILE_HPP
