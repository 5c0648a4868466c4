#include "exr/uad/time.hpp"

#include <array>
#include <chrono>
#include <cstdio>

#include "exr/uad/error.hpp"

namespace exr {

namespace {

using namespace std::chrono;

constexpr std::int64_t kMsPerSecond = 1000;
constexpr std::int64_t kMsPerMinute = 60 * kMsPerSecond;
constexpr std::int64_t kMsPerHour = 60 * kMsPerMinute;
constexpr std::int64_t kMsPerDay = 24 * kMsPerHour;
constexpr std::int64_t kDaysPerMonth = 30;
constexpr std::int64_t kDaysPerYear = 365;

// The seven two/three-digit groups of `DDDDDD:DDDDDD:DDD`.
struct Fields {
  int a, b, c, d, e, f, ms;
};

bool split_fixed_width(std::string_view s, Fields& out) {
  if (s.size() != 17 || s[6] != ':' || s[13] != ':') return false;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (i == 6 || i == 13) continue;
    if (s[i] < '0' || s[i] > '9') return false;
  }
  auto two = [&](std::size_t at) { return (s[at] - '0') * 10 + (s[at + 1] - '0'); };
  out = {two(0), two(2), two(4), two(7), two(9), two(11),
         (s[14] - '0') * 100 + (s[15] - '0') * 10 + (s[16] - '0')};
  return true;
}

std::string join_fixed_width(const Fields& f) {
  std::array<char, 32> buf{};
  std::snprintf(buf.data(), buf.size(), "%02d%02d%02d:%02d%02d%02d:%03d", f.a, f.b, f.c, f.d,
                f.e, f.f, f.ms);
  return std::string(buf.data());
}

struct Civil {
  int year, month, day, hour, minute, second, millis;
};

Civil to_civil(std::int64_t unix_ms) {
  auto ms = milliseconds{unix_ms};
  auto day_point = floor<days>(sys_time<milliseconds>{ms});
  year_month_day ymd{day_point};
  auto rem = ms - day_point.time_since_epoch();
  auto r = rem.count();
  return {static_cast<int>(ymd.year()),
          static_cast<int>(static_cast<unsigned>(ymd.month())),
          static_cast<int>(static_cast<unsigned>(ymd.day())),
          static_cast<int>(r / kMsPerHour),
          static_cast<int>((r / kMsPerMinute) % 60),
          static_cast<int>((r / kMsPerSecond) % 60),
          static_cast<int>(r % 1000)};
}

}  // namespace

Timestamp Timestamp::parse(std::string_view text) {
  Fields f{};
  if (!split_fixed_width(text, f)) {
    throw Error(ErrorCode::MalformedTimestamp, "expected YYMMDD:HHMMSS:mmm, got '" +
                                                   std::string(text) + "'");
  }
  std::chrono::year_month_day ymd{std::chrono::year{2000 + f.a},
                                  std::chrono::month{static_cast<unsigned>(f.b)},
                                  std::chrono::day{static_cast<unsigned>(f.c)}};
  if (!ymd.ok() || f.d > 23 || f.e > 59 || f.f > 59) {
    throw Error(ErrorCode::InvalidCalendar, "'" + std::string(text) + "' is not a calendar instant");
  }
  std::int64_t day_ms = sys_days{ymd}.time_since_epoch().count() * kMsPerDay;
  return Timestamp(day_ms + f.d * kMsPerHour + f.e * kMsPerMinute + f.f * kMsPerSecond + f.ms);
}

Timestamp Timestamp::from_unix_millis(std::int64_t millis) {
  auto c = to_civil(millis);
  if (c.year < 2000 || c.year > 2099) {
    throw Error(ErrorCode::InvalidCalendar,
                "instant outside the representable 2000-2099 range");
  }
  return Timestamp(millis);
}

std::string Timestamp::to_string() const {
  auto c = to_civil(millis_);
  return join_fixed_width({c.year - 2000, c.month, c.day, c.hour, c.minute, c.second, c.millis});
}

int Timestamp::year() const { return to_civil(millis_).year; }
int Timestamp::month() const { return to_civil(millis_).month; }
int Timestamp::day() const { return to_civil(millis_).day; }
int Timestamp::hour() const { return to_civil(millis_).hour; }
int Timestamp::minute() const { return to_civil(millis_).minute; }
int Timestamp::second() const { return to_civil(millis_).second; }
int Timestamp::millisecond() const { return to_civil(millis_).millis; }

TimeDelta TimeDelta::parse(std::string_view text) {
  Fields f{};
  if (!split_fixed_width(text, f)) {
    throw Error(ErrorCode::MalformedTimedelta, "expected YYMMDD:HHMMSS:mmm, got '" +
                                                   std::string(text) + "'");
  }
  TimeDelta d;
  d.years_ = f.a;
  d.months_ = f.b;
  d.days_ = f.c;
  d.hours_ = f.d;
  d.minutes_ = f.e;
  d.seconds_ = f.f;
  d.millis_ = f.ms;
  return d;
}

TimeDelta TimeDelta::from_millis(std::int64_t millis) {
  if (millis < 0) {
    throw Error(ErrorCode::MalformedTimedelta, "negative duration");
  }
  TimeDelta d;
  std::int64_t whole_days = millis / kMsPerDay;
  std::int64_t rest = millis % kMsPerDay;
  d.years_ = static_cast<int>(whole_days / kDaysPerYear);
  whole_days %= kDaysPerYear;
  d.months_ = static_cast<int>(whole_days / kDaysPerMonth);
  d.days_ = static_cast<int>(whole_days % kDaysPerMonth);
  if (d.years_ > 99) {
    throw Error(ErrorCode::MalformedTimedelta, "duration exceeds 99 years");
  }
  d.hours_ = static_cast<int>(rest / kMsPerHour);
  d.minutes_ = static_cast<int>((rest / kMsPerMinute) % 60);
  d.seconds_ = static_cast<int>((rest / kMsPerSecond) % 60);
  d.millis_ = static_cast<int>(rest % 1000);
  return d;
}

std::string TimeDelta::to_string() const {
  return join_fixed_width({years_, months_, days_, hours_, minutes_, seconds_, millis_});
}

std::int64_t TimeDelta::total_millis() const noexcept {
  std::int64_t days_total = years_ * kDaysPerYear + months_ * kDaysPerMonth + days_;
  return days_total * kMsPerDay + hours_ * kMsPerHour + minutes_ * kMsPerMinute +
         seconds_ * kMsPerSecond + millis_;
}

}  // namespace exr
