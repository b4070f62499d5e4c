#pragma once

#include <charconv>
#include <cmath>
#include <cstdint>
#include <istream>
#include <limits>
#include <optional>
#include <string>
#include <string_view>
#include <system_error>
#include <unordered_map>
#include <vector>

#include "cdrscore/error.hpp"

namespace cdrscore::csv {

// Splits one delimited line. Double-quoted fields may contain the delimiter;
// a doubled quote inside a quoted field is a literal quote.
inline std::vector<std::string> split(std::string_view line, char delimiter = ',') {
  if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
  std::vector<std::string> fields;
  std::string current;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          current.push_back('"');
          ++i;
        } else {
          quoted = false;
        }
      } else {
        current.push_back(c);
      }
    } else if (c == '"' && current.empty()) {
      quoted = true;
    } else if (c == delimiter) {
      fields.push_back(std::move(current));
      current.clear();
    } else {
      current.push_back(c);
    }
  }
  fields.push_back(std::move(current));
  return fields;
}

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

inline bool is_blank(std::string_view s) { return trim(s).empty(); }

template <typename Int>
std::optional<Int> parse_int(std::string_view s) {
  s = trim(s);
  if (s.empty()) return std::nullopt;
  if (s.front() == '+') s.remove_prefix(1);
  Int value{};
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
  if (ec != std::errc{} || ptr != s.data() + s.size()) return std::nullopt;
  return value;
}

inline std::optional<double> parse_double(std::string_view s) {
  s = trim(s);
  if (s.empty()) return std::nullopt;
  if (s.front() == '+') s.remove_prefix(1);
  double value{};
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
  if (ec != std::errc{} || ptr != s.data() + s.size()) return std::nullopt;
  return value;
}

// Shortest representation that parses back to the identical double.
inline std::string format_double(double v) {
  if (std::isnan(v)) return "NA";
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

inline std::string quote_if_needed(std::string_view field, char delimiter = ',') {
  if (field.find(delimiter) == std::string_view::npos && field.find('"') == std::string_view::npos)
    return std::string(field);
  std::string out = "\"";
  for (char c : field) {
    if (c == '"') out.push_back('"');
    out.push_back(c);
  }
  out.push_back('"');
  return out;
}

// A delimited file with a mandatory header row; columns are looked up by name.
class Table {
 public:
  static Table read(std::istream& in, const std::string& source, char delimiter = ',') {
    Table t;
    t.source_ = source;
    std::string line;
    std::size_t row = 0;
    while (std::getline(in, line)) {
      ++row;
      if (is_blank(line)) continue;
      auto fields = split(line, delimiter);
      if (t.header_.empty()) {
        for (auto& f : fields) f = std::string(trim(f));
        t.header_ = std::move(fields);
        for (std::size_t i = 0; i < t.header_.size(); ++i) t.column_[t.header_[i]] = i;
        continue;
      }
      t.rows_.push_back(std::move(fields));
      t.row_numbers_.push_back(row);
    }
    if (in.bad()) throw DataError("cannot read " + source);
    if (t.header_.empty()) throw DataError(source + ": missing header row");
    return t;
  }

  std::size_t column(const std::string& name) const {
    auto it = column_.find(name);
    if (it == column_.end()) throw DataError(source_ + ": missing column '" + name + "'");
    return it->second;
  }
  bool has_column(const std::string& name) const { return column_.count(name) != 0; }

  const std::vector<std::string>& header() const { return header_; }
  const std::vector<std::vector<std::string>>& rows() const { return rows_; }
  std::size_t line_number(std::size_t i) const { return row_numbers_[i]; }
  const std::string& source() const { return source_; }

  std::string_view cell(std::size_t r, std::size_t c) const {
    if (c >= rows_[r].size())
      throw RowError(row_numbers_[r], source_ + ": expected at least " + std::to_string(c + 1) +
                                          " fields");
    return trim(rows_[r][c]);
  }

 private:
  std::string source_;
  std::vector<std::string> header_;
  std::unordered_map<std::string, std::size_t> column_;
  std::vector<std::vector<std::string>> rows_;
  std::vector<std::size_t> row_numbers_;
};

}  // namespace cdrscore::csv
