#pragma once

#include <chrono>
#include <compare>
#include <cstdint>
#include <string>
#include <string_view>

namespace etk {

/// Calendar date with day resolution, stored as days since 1970-01-01.
class Date {
 public:
  constexpr Date() = default;
  constexpr explicit Date(std::int32_t days_since_epoch) : days_(days_since_epoch) {}

  static Date from_ymd(int year, unsigned month, unsigned day);

  /// Parses `YYYY-MM-DD`. Throws std::invalid_argument on malformed input.
  static Date parse(std::string_view iso);

  [[nodiscard]] std::string to_string() const;
  [[nodiscard]] constexpr std::int32_t days() const { return days_; }
  [[nodiscard]] std::chrono::year_month_day ymd() const;
  [[nodiscard]] int year() const;

  constexpr Date operator+(std::int32_t d) const { return Date{days_ + d}; }
  constexpr Date operator-(std::int32_t d) const { return Date{days_ - d}; }
  constexpr std::int32_t operator-(Date other) const { return days_ - other.days_; }

  constexpr auto operator<=>(const Date&) const = default;

 private:
  std::int32_t days_ = 0;
};

inline constexpr double kDaysPerYear = 365.25;

/// Age in completed calendar years at `at`.
int age_in_years(Date birth, Date at);

/// Fractional years between two dates (days / 365.25).
inline double years_between(Date from, Date to) {
  return static_cast<double>(to - from) / kDaysPerYear;
}

}  // namespace etk
