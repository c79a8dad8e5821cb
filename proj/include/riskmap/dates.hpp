#pragma once

#include <compare>
#include <string>
#include <string_view>

namespace riskmap {

// Calendar day as a count of days since 1970-01-01 (proleptic Gregorian).
class Date {
 public:
  constexpr Date() = default;
  constexpr explicit Date(int days_since_epoch) : days_(days_since_epoch) {}

  static Date from_ymd(int year, int month, int day);
  // Strict YYYY-MM-DD; throws std::invalid_argument otherwise.
  static Date parse(std::string_view text);

  std::string to_string() const;
  constexpr int days_since_epoch() const { return days_; }

  constexpr Date operator+(int days) const { return Date(days_ + days); }
  constexpr int operator-(Date other) const { return days_ - other.days_; }
  constexpr auto operator<=>(const Date&) const = default;

 private:
  int days_ = 0;
};

}  // namespace riskmap
