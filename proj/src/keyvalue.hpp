#pragma once

// Flat `key = value` text shared by the pipeline config and scene specs.

#include <charconv>
#include <cstdint>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "cellipse/errors.hpp"

namespace cellipse::detail {

struct KeyValue {
  std::string key;
  std::string value;
  int line = 0;
};

inline std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

inline std::vector<KeyValue> parse_key_values(std::string_view text) {
  std::vector<KeyValue> out;
  int line_no = 0;
  while (!text.empty()) {
    ++line_no;
    const auto eol = text.find('\n');
    std::string_view line = text.substr(0, eol);
    text = eol == std::string_view::npos ? std::string_view{} : text.substr(eol + 1);
    if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos)
      throw ConfigError("line " + std::to_string(line_no) + ": expected key = value");
    const auto key = trim(line.substr(0, eq));
    const auto value = trim(line.substr(eq + 1));
    if (key.empty() || value.empty())
      throw ConfigError("line " + std::to_string(line_no) + ": empty key or value");
    out.push_back({std::string(key), std::string(value), line_no});
  }
  return out;
}

[[noreturn]] inline void bad_value(const KeyValue& kv) {
  throw ConfigError("line " + std::to_string(kv.line) + ": invalid value for " + kv.key + ": " +
                    kv.value);
}

template <typename T>
T parse_number(const KeyValue& kv, std::string_view s) {
  T v{};
  const auto* end = s.data() + s.size();
  const auto [ptr, ec] = std::from_chars(s.data(), end, v);
  if (ec != std::errc{} || ptr != end) bad_value(kv);
  return v;
}

template <typename T>
T parse_number(const KeyValue& kv) {
  return parse_number<T>(kv, kv.value);
}

inline bool parse_bool(const KeyValue& kv) {
  if (kv.value == "true" || kv.value == "1" || kv.value == "yes") return true;
  if (kv.value == "false" || kv.value == "0" || kv.value == "no") return false;
  bad_value(kv);
}

/// Splits on `sep`, trimming each part.
inline std::vector<std::string_view> split(std::string_view s, char sep) {
  std::vector<std::string_view> parts;
  while (true) {
    const auto pos = s.find(sep);
    parts.push_back(trim(s.substr(0, pos)));
    if (pos == std::string_view::npos) break;
    s = s.substr(pos + 1);
  }
  return parts;
}

/// Shortest representation that reads back to the same double.
inline std::string format_number(double v) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

}  // namespace cellipse::detail
