// SPDX-License-Identifier: Apache-2.0
#include "fst/config.hpp"

#include <CLI11.hpp>

#include <charconv>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace fst {

KeyValues KeyValues::parse(const std::string& text) {
  std::istringstream in(text);
  KeyValues kv;
  for (const auto& item : CLI::ConfigINI().from_config(in)) {
    // CLI11 emits synthetic "++"/"--" markers when entering or leaving sections.
    if (item.name == "++" || item.name == "--") continue;
    std::string key;
    for (const auto& p : item.parents) {
      if (p != "default") key += p + ".";
    }
    key += item.name;
    std::string value;
    for (std::size_t i = 0; i < item.inputs.size(); ++i) value += (i ? " " : "") + item.inputs[i];
    kv.values_[key] = value;
  }
  return kv;
}

KeyValues KeyValues::load(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("cannot open config file " + path);
  std::stringstream ss;
  ss << f.rdbuf();
  return parse(ss.str());
}

const std::string& KeyValues::get(const std::string& key) const {
  auto it = values_.find(key);
  if (it == values_.end()) throw std::out_of_range("missing config key " + key);
  return it->second;
}

namespace {

template <class T>
T parse_number(const std::string& key, const std::string& text) {
  T v{};
  const char* end = text.data() + text.size();
  auto [ptr, ec] = std::from_chars(text.data(), end, v);
  if (ec != std::errc() || ptr != end) {
    throw std::invalid_argument("config key " + key + ": cannot parse '" + text + "'");
  }
  return v;
}

}  // namespace

long long KeyValues::get_int(const std::string& key, long long fallback) const {
  return has(key) ? parse_number<long long>(key, get(key)) : fallback;
}

std::uint64_t KeyValues::get_u64(const std::string& key, std::uint64_t fallback) const {
  return has(key) ? parse_number<std::uint64_t>(key, get(key)) : fallback;
}

double KeyValues::get_double(const std::string& key, double fallback) const {
  return has(key) ? parse_number<double>(key, get(key)) : fallback;
}

bool KeyValues::get_bool(const std::string& key, bool fallback) const {
  if (!has(key)) return fallback;
  const auto& v = get(key);
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  throw std::invalid_argument("config key " + key + ": not a boolean: " + v);
}

std::vector<int> KeyValues::get_int_list(const std::string& key, std::vector<int> fallback) const {
  return has(key) ? parse_int_list(get(key)) : fallback;
}

std::string KeyValues::to_text() const {
  std::string out;
  std::string section;
  // Top-level keys first, then one block per section.
  for (const auto& [k, v] : values_) {
    if (k.find('.') == std::string::npos) out += k + " = " + v + "\n";
  }
  for (const auto& [k, v] : values_) {
    const auto dot = k.find('.');
    if (dot == std::string::npos) continue;
    const std::string s = k.substr(0, dot);
    if (s != section) {
      out += "[" + s + "]\n";
      section = s;
    }
    out += k.substr(dot + 1) + " = " + v + "\n";
  }
  return out;
}

std::vector<int> parse_int_list(const std::string& text) {
  std::vector<int> out;
  std::string token;
  auto flush = [&] {
    if (!token.empty()) out.push_back(parse_number<int>("list", token));
    token.clear();
  };
  for (char ch : text) {
    if (ch == ',' || ch == ' ' || ch == '[' || ch == ']' || ch == '\t') {
      flush();
    } else {
      token += ch;
    }
  }
  flush();
  return out;
}

std::string format_int_list(const std::vector<int>& values) {
  std::string out;
  for (std::size_t i = 0; i < values.size(); ++i) out += (i ? "," : "") + std::to_string(values[i]);
  return out;
}

std::string format_double(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return {buf, ptr};
}

}  // namespace fst
