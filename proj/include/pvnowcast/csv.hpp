#pragma once

#include <charconv>
#include <cstddef>
#include <fstream>
#include <optional>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include "pvnowcast/error.hpp"

namespace pvnowcast::csv {

inline std::vector<std::string_view> split(std::string_view line, char sep = ',') {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t pos = line.find(sep, start);
    if (pos == std::string_view::npos) {
      out.push_back(line.substr(start));
      return out;
    }
    out.push_back(line.substr(start, pos - start));
    start = pos + 1;
  }
}

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

inline std::optional<double> parse_double(std::string_view s) {
  s = trim(s);
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || ptr != s.data() + s.size() || s.empty()) return std::nullopt;
  return v;
}

inline std::optional<long long> parse_int(std::string_view s) {
  s = trim(s);
  long long v = 0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || ptr != s.data() + s.size() || s.empty()) return std::nullopt;
  return v;
}

/// Shortest-general formatting with the given significant digits ("%.<digits>g").
inline std::string format_double(double v, int digits = 9) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v, std::chars_format::general, digits);
  return std::string(buf, res.ptr);
}

/// Shortest representation that parses back to the same double.
inline std::string format_exact(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

/// Header-indexed reader. Column lookup by name; rows are returned as raw fields.
class Reader {
 public:
  explicit Reader(const std::string& path) : path_(path), in_(path) {
    if (!in_) throw DataError("cannot open " + path);
    std::string header;
    if (!std::getline(in_, header)) throw DataError(path + ": empty file, header row expected");
    if (header.size() >= 3 && header.compare(0, 3, "\xEF\xBB\xBF") == 0) header.erase(0, 3);
    for (auto f : split(trim(header))) columns_.emplace_back(trim(f));
  }

  const std::vector<std::string>& columns() const { return columns_; }

  std::optional<std::size_t> find(std::string_view name) const {
    for (std::size_t i = 0; i < columns_.size(); ++i)
      if (columns_[i] == name) return i;
    return std::nullopt;
  }

  std::size_t require(std::string_view name) const {
    if (auto i = find(name)) return *i;
    throw DataError(path_ + ": missing column '" + std::string(name) + "'");
  }

  /// Next non-empty row; false at end of file. line_number() is 1-based (header = 1).
  bool next(std::vector<std::string_view>& fields) {
    while (std::getline(in_, line_)) {
      ++line_no_;
      if (trim(line_).empty()) continue;
      fields = split(trim(line_));
      if (fields.size() != columns_.size())
        throw DataError(path_ + ":" + std::to_string(line_no_) + ": expected " +
                        std::to_string(columns_.size()) + " fields, got " +
                        std::to_string(fields.size()));
      return true;
    }
    return false;
  }

  std::size_t line_number() const { return line_no_; }
  const std::string& path() const { return path_; }

 private:
  std::string path_;
  std::ifstream in_;
  std::vector<std::string> columns_;
  std::string line_;
  std::size_t line_no_ = 1;
};

}  // namespace pvnowcast::csv
