#pragma once

#include <array>
#include <cctype>
#include <chrono>
#include <cstdio>
#include <optional>
#include <string>
#include <string_view>

#include "cdrscore/csv.hpp"

namespace cdrscore {

using Date = std::chrono::sys_days;
using YearMonth = std::chrono::year_month;

// Seconds since midnight, 0..86399.
struct TimeOfDay {
  int seconds = 0;

  int hour() const { return seconds / 3600; }
  int minute() const { return (seconds / 60) % 60; }
  int second() const { return seconds % 60; }
  friend auto operator<=>(const TimeOfDay&, const TimeOfDay&) = default;
};

// Inclusive range of calendar days.
struct DateRange {
  Date first;
  Date last;

  bool contains(Date d) const { return first <= d && d <= last; }
  friend bool operator==(const DateRange&, const DateRange&) = default;
};

namespace calendar {

inline constexpr std::array<std::string_view, 12> kMonthAbbrev = {
    "JAN", "FEB", "MAR", "APR", "MAY", "JUN", "JUL", "AUG", "SEP", "OCT", "NOV", "DEC"};

inline constexpr std::array<std::string_view, 7> kWeekdayNames = {
    "Monday", "Tuesday", "Wednesday", "Thursday", "Friday", "Saturday", "Sunday"};

inline std::optional<Date> make_date(int y, unsigned m, unsigned d) {
  const std::chrono::year_month_day ymd{std::chrono::year{y}, std::chrono::month{m},
                                        std::chrono::day{d}};
  if (!ymd.ok()) return std::nullopt;
  return Date{ymd};
}

// DDMONYYYY, e.g. 01MAY2017.
inline std::optional<Date> parse_cdr_date(std::string_view s) {
  s = csv::trim(s);
  if (s.size() != 9) return std::nullopt;
  auto day = csv::parse_int<unsigned>(s.substr(0, 2));
  auto year = csv::parse_int<int>(s.substr(5, 4));
  if (!day || !year) return std::nullopt;
  std::string mon(s.substr(2, 3));
  for (auto& c : mon) c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
  for (unsigned m = 0; m < 12; ++m)
    if (kMonthAbbrev[m] == mon) return make_date(*year, m + 1, *day);
  return std::nullopt;
}

inline std::string format_cdr_date(Date d) {
  const std::chrono::year_month_day ymd{d};
  char buf[16];
  std::snprintf(buf, sizeof buf, "%02u%s%04d", static_cast<unsigned>(ymd.day()),
                kMonthAbbrev[static_cast<unsigned>(ymd.month()) - 1].data(),
                static_cast<int>(ymd.year()));
  return buf;
}

// YYYY-MM-DD
inline std::optional<Date> parse_iso_date(std::string_view s) {
  s = csv::trim(s);
  if (s.size() != 10 || s[4] != '-' || s[7] != '-') return std::nullopt;
  auto y = csv::parse_int<int>(s.substr(0, 4));
  auto m = csv::parse_int<unsigned>(s.substr(5, 2));
  auto d = csv::parse_int<unsigned>(s.substr(8, 2));
  if (!y || !m || !d) return std::nullopt;
  return make_date(*y, *m, *d);
}

inline std::string format_iso_date(Date d) {
  const std::chrono::year_month_day ymd{d};
  char buf[16];
  std::snprintf(buf, sizeof buf, "%04d-%02u-%02u", static_cast<int>(ymd.year()),
                static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()));
  return buf;
}

// YYYY-MM
inline std::optional<YearMonth> parse_year_month(std::string_view s) {
  s = csv::trim(s);
  if (s.size() != 7 || s[4] != '-') return std::nullopt;
  auto y = csv::parse_int<int>(s.substr(0, 4));
  auto m = csv::parse_int<unsigned>(s.substr(5, 2));
  if (!y || !m || *m < 1 || *m > 12) return std::nullopt;
  return YearMonth{std::chrono::year{*y}, std::chrono::month{*m}};
}

inline std::string format_year_month(YearMonth ym) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "%04d-%02u", static_cast<int>(ym.year()),
                static_cast<unsigned>(ym.month()));
  return buf;
}

// HH:MM:SS
inline std::optional<TimeOfDay> parse_time(std::string_view s) {
  s = csv::trim(s);
  if (s.size() != 8 || s[2] != ':' || s[5] != ':') return std::nullopt;
  auto h = csv::parse_int<int>(s.substr(0, 2));
  auto m = csv::parse_int<int>(s.substr(3, 2));
  auto sec = csv::parse_int<int>(s.substr(6, 2));
  if (!h || !m || !sec) return std::nullopt;
  if (*h < 0 || *h > 23 || *m < 0 || *m > 59 || *sec < 0 || *sec > 59) return std::nullopt;
  return TimeOfDay{*h * 3600 + *m * 60 + *sec};
}

inline std::string format_time(TimeOfDay t) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "%02d:%02d:%02d", t.hour(), t.minute(), t.second());
  return buf;
}

// Monday = 0 ... Sunday = 6
inline int weekday_index(Date d) {
  return static_cast<int>(std::chrono::weekday{d}.iso_encoding()) - 1;
}

inline bool is_weekend(Date d) { return weekday_index(d) >= 5; }

inline YearMonth year_month_of(Date d) {
  const std::chrono::year_month_day ymd{d};
  return ymd.year() / ymd.month();
}

inline Date first_day(YearMonth ym) { return Date{ym / std::chrono::day{1}}; }
inline Date last_day(YearMonth ym) { return Date{ym / std::chrono::last}; }

inline YearMonth add_months(YearMonth ym, int n) { return ym + std::chrono::months{n}; }

// Number of whole months from `from` to `to` (negative when `to` is earlier).
inline int months_between(YearMonth from, YearMonth to) {
  return (static_cast<int>(to.year()) - static_cast<int>(from.year())) * 12 +
         static_cast<int>(static_cast<unsigned>(to.month())) -
         static_cast<int>(static_cast<unsigned>(from.month()));
}

inline int days_in(YearMonth ym) {
  return static_cast<int>((last_day(ym) - first_day(ym)).count()) + 1;
}

// The `span` whole calendar months immediately before `month`.
inline DateRange months_before(YearMonth month, int span) {
  return {first_day(add_months(month, -span)), last_day(add_months(month, -1))};
}

}  // namespace calendar
}  // namespace cdrscore
