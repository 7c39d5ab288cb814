#pragma once

#include <charconv>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include "siamsa/tensor.hpp"

namespace siamsa {

/// Shortest round-trip decimal form; stable across runs and platforms.
inline std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  if (res.ec != std::errc{}) throw InvariantViolation("format_double: conversion failed");
  return std::string(buf, res.ptr);
}

inline std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

inline double parse_double(std::string_view s, const std::string& what) {
  s = trim(s);
  if (!s.empty() && s.front() == '+') s.remove_prefix(1);
  double v = 0.0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc{} || res.ptr != s.data() + s.size())
    throw InvalidInput(what + ": cannot parse number '" + std::string(s) + "'");
  if (!std::isfinite(v)) throw InvalidInput(what + ": value must be finite, got '" + std::string(s) + "'");
  return v;
}

inline std::uint64_t parse_uint(std::string_view s, const std::string& what) {
  s = trim(s);
  std::uint64_t v = 0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc{} || res.ptr != s.data() + s.size())
    throw InvalidInput(what + ": cannot parse integer '" + std::string(s) + "'");
  return v;
}

inline bool parse_bool(std::string_view s, const std::string& what) {
  s = trim(s);
  if (s == "true" || s == "1" || s == "yes" || s == "on") return true;
  if (s == "false" || s == "0" || s == "no" || s == "off") return false;
  throw InvalidInput(what + ": expected a boolean, got '" + std::string(s) + "'");
}

/// Splits on any of the given delimiters, dropping empty fields.
inline std::vector<std::string_view> split(std::string_view s, std::string_view delims) {
  std::vector<std::string_view> out;
  std::size_t pos = 0;
  while (pos <= s.size()) {
    const auto next = s.find_first_of(delims, pos);
    const auto field = trim(s.substr(pos, next == std::string_view::npos ? s.npos : next - pos));
    if (!field.empty()) out.push_back(field);
    if (next == std::string_view::npos) break;
    pos = next + 1;
  }
  return out;
}

inline std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InvalidInput("cannot open " + path.string());
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

inline void write_text_file(const std::filesystem::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw InvalidInput("cannot write " + path.string());
  out << content;
  if (!out) throw InvalidInput("write failed for " + path.string());
}

/// Flat `key = value` text; `#` starts a comment. Later keys override earlier ones.
using KeyValues = std::map<std::string, std::string>;

inline KeyValues parse_key_values(std::string_view text, const std::string& source) {
  KeyValues kv;
  std::size_t line_no = 0;
  for (std::string_view rest = text; !rest.empty();) {
    const auto nl = rest.find('\n');
    std::string_view line = rest.substr(0, nl);
    rest = nl == std::string_view::npos ? std::string_view{} : rest.substr(nl + 1);
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos)
      throw InvalidInput(source + ":" + std::to_string(line_no) + ": expected key = value");
    const auto key = trim(line.substr(0, eq));
    if (key.empty()) throw InvalidInput(source + ":" + std::to_string(line_no) + ": empty key");
    kv[std::string(key)] = std::string(trim(line.substr(eq + 1)));
  }
  return kv;
}

}  // namespace siamsa
