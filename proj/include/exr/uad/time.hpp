#pragma once

#include <compare>
#include <cstdint>
#include <string>
#include <string_view>

namespace exr {

/// Wall-clock instant in the fixed-width `YYMMDD:HHMMSS:mmm` form.
/// Two-digit years map to 2000-2099.
class Timestamp {
 public:
  Timestamp() = default;

  /// Throws MalformedTimestamp on bad width/characters and InvalidCalendar on
  /// out-of-range fields (month 13, Feb 30, hour 24, ...).
  static Timestamp parse(std::string_view text);
  static Timestamp from_unix_millis(std::int64_t millis);

  std::string to_string() const;
  std::int64_t unix_millis() const noexcept { return millis_; }

  int year() const;
  int month() const;
  int day() const;
  int hour() const;
  int minute() const;
  int second() const;
  int millisecond() const;

  friend auto operator<=>(const Timestamp&, const Timestamp&) = default;

 private:
  explicit Timestamp(std::int64_t millis) : millis_(millis) {}
  std::int64_t millis_ = 946684800000;  // 2000-01-01T00:00:00.000Z
};

/// Elapsed quantity in the same three fixed-width groups as Timestamp:
/// years-months-days : hours-minutes-seconds : milliseconds. Fields are kept
/// verbatim so parse/format round-trips byte-exactly.
class TimeDelta {
 public:
  TimeDelta() = default;

  static TimeDelta parse(std::string_view text);
  /// Canonical form: 365-day years, 30-day months, 24 h days.
  static TimeDelta from_millis(std::int64_t millis);

  std::string to_string() const;

  bool has_date_part() const noexcept { return years_ || months_ || days_; }

  /// Exact when the date part is zero. Nonzero date parts are converted with
  /// 24 h days, 30-day months and 365-day years; check has_date_part() to flag.
  std::int64_t total_millis() const noexcept;
  double as_seconds() const noexcept { return static_cast<double>(total_millis()) / 1000.0; }

  friend bool operator==(const TimeDelta&, const TimeDelta&) = default;

 private:
  int years_ = 0, months_ = 0, days_ = 0;
  int hours_ = 0, minutes_ = 0, seconds_ = 0;
  int millis_ = 0;
};

inline Timestamp operator+(const Timestamp& t, const TimeDelta& d) {
  return Timestamp::from_unix_millis(t.unix_millis() + d.total_millis());
}

}  // namespace exr
