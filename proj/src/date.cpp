#include "etk/date.hpp"

#include <charconv>
#include <cstdio>
#include <stdexcept>

namespace etk {

Date Date::from_ymd(int year, unsigned month, unsigned day) {
  const std::chrono::year_month_day ymd{std::chrono::year{year}, std::chrono::month{month},
                                        std::chrono::day{day}};
  if (!ymd.ok()) {
    throw std::invalid_argument("invalid calendar date " + std::to_string(year) + "-" +
                                std::to_string(month) + "-" + std::to_string(day));
  }
  return Date{static_cast<std::int32_t>(std::chrono::sys_days{ymd}.time_since_epoch().count())};
}

Date Date::parse(std::string_view iso) {
  auto fail = [&] { return std::invalid_argument("malformed date '" + std::string(iso) + "'"); };
  if (iso.size() != 10 || iso[4] != '-' || iso[7] != '-') throw fail();
  int y = 0;
  unsigned m = 0, d = 0;
  auto num = [&](std::string_view s, auto& out) {
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
    if (ec != std::errc{} || p != s.data() + s.size()) throw fail();
  };
  num(iso.substr(0, 4), y);
  num(iso.substr(5, 2), m);
  num(iso.substr(8, 2), d);
  try {
    return from_ymd(y, m, d);
  } catch (const std::invalid_argument&) {
    throw fail();
  }
}

std::chrono::year_month_day Date::ymd() const {
  return std::chrono::year_month_day{std::chrono::sys_days{std::chrono::days{days_}}};
}

int Date::year() const { return static_cast<int>(ymd().year()); }

std::string Date::to_string() const {
  const auto v = ymd();
  char buf[16];
  std::snprintf(buf, sizeof buf, "%04d-%02u-%02u", static_cast<int>(v.year()),
                static_cast<unsigned>(v.month()), static_cast<unsigned>(v.day()));
  return buf;
}

int age_in_years(Date birth, Date at) {
  const auto b = birth.ymd();
  const auto a = at.ymd();
  int age = static_cast<int>(a.year()) - static_cast<int>(b.year());
  if (std::chrono::month_day{a.month(), a.day()} < std::chrono::month_day{b.month(), b.day()}) {
    --age;
  }
  return age;
}

}  // namespace etk
