// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace fst {

/// Flat "key = value" settings with optional [section] headers. Keys inside a
/// section are stored as "section.key".
class KeyValues {
 public:
  static KeyValues parse(const std::string& text);
  static KeyValues load(const std::string& path);

  [[nodiscard]] bool has(const std::string& key) const { return values_.count(key) != 0; }
  [[nodiscard]] const std::string& get(const std::string& key) const;
  void set(const std::string& key, std::string value) { values_[key] = std::move(value); }

  [[nodiscard]] long long get_int(const std::string& key, long long fallback) const;
  [[nodiscard]] std::uint64_t get_u64(const std::string& key, std::uint64_t fallback) const;
  [[nodiscard]] double get_double(const std::string& key, double fallback) const;
  [[nodiscard]] bool get_bool(const std::string& key, bool fallback) const;
  [[nodiscard]] std::vector<int> get_int_list(const std::string& key, std::vector<int> fallback) const;

  /// Sections in key order; round-trips through parse().
  [[nodiscard]] std::string to_text() const;
  [[nodiscard]] const std::map<std::string, std::string>& values() const { return values_; }

  friend bool operator==(const KeyValues&, const KeyValues&) = default;

 private:
  std::map<std::string, std::string> values_;
};

/// Accepts "3,5,6", "3 5 6" or "[3, 5, 6]".
std::vector<int> parse_int_list(const std::string& text);
std::string format_int_list(const std::vector<int>& values);
/// Shortest decimal text that parses back to the same double.
std::string format_double(double v);

}  // namespace fst
