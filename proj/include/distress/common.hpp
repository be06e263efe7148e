#pragma once

// Shared vocabulary for the distress library: calendar keys, error types and
// seeded random-number helpers.

#include <chrono>
#include <compare>
#include <cstdint>
#include <cstdio>
#include <random>
#include <stdexcept>
#include <string>
#include <string_view>

namespace distress {

// Input that violates a documented precondition or schema.
class ValidationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed file content; carries the 1-based line number when known.
class ParseError : public ValidationError {
 public:
  ParseError(const std::string& what, std::size_t line = 0)
      : ValidationError(line ? what + " (line " + std::to_string(line) + ")" : what),
        line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

// Lookup of a key that is not present (unknown sentence id, bank id, ...).
class LookupError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// ---------------------------------------------------------------------------
// Calendar keys

using Timestamp = std::chrono::sys_seconds;

struct Date {
  int year = 1970;
  int month = 1;
  int day = 1;

  auto operator<=>(const Date&) const = default;

  std::chrono::sys_days days() const {
    return std::chrono::sys_days{std::chrono::year{year} / std::chrono::month{static_cast<unsigned>(month)} /
                                 std::chrono::day{static_cast<unsigned>(day)}};
  }
  static Date from_days(std::chrono::sys_days d) {
    const std::chrono::year_month_day ymd{d};
    return {static_cast<int>(ymd.year()), static_cast<int>(static_cast<unsigned>(ymd.month())),
            static_cast<int>(static_cast<unsigned>(ymd.day()))};
  }
  bool valid() const {
    return std::chrono::year_month_day{std::chrono::year{year} / std::chrono::month{static_cast<unsigned>(month)} /
                                       std::chrono::day{static_cast<unsigned>(day)}}
        .ok();
  }
};

struct Month {
  int year = 1970;
  int month = 1;  // 1..12

  auto operator<=>(const Month&) const = default;

  Date first_day() const { return {year, month, 1}; }
  Date last_day() const {
    const auto last = std::chrono::year_month_day_last{std::chrono::year{year},
                                                       std::chrono::month_day_last{std::chrono::month{
                                                           static_cast<unsigned>(month)}}};
    return {year, month, static_cast<int>(static_cast<unsigned>(last.day()))};
  }
  Month next() const { return month == 12 ? Month{year + 1, 1} : Month{year, month + 1}; }
  int index() const { return year * 12 + (month - 1); }
  static Month from_index(int i) { return {i / 12, i % 12 + 1}; }
};

struct Quarter {
  int year = 1970;
  int q = 1;  // 1..4

  auto operator<=>(const Quarter&) const = default;

  Quarter next() const { return q == 4 ? Quarter{year + 1, 1} : Quarter{year, q + 1}; }
  Month first_month() const { return {year, (q - 1) * 3 + 1}; }
  int index() const { return year * 4 + (q - 1); }
};

inline Month month_of(const Date& d) { return {d.year, d.month}; }
inline Quarter quarter_of(const Month& m) { return {m.year, (m.month - 1) / 3 + 1}; }
inline Quarter quarter_of(const Date& d) { return quarter_of(month_of(d)); }

inline Date date_of(Timestamp t) { return Date::from_days(std::chrono::floor<std::chrono::days>(t)); }

inline std::string to_string(const Date& d) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "%04d-%02d-%02d", d.year, d.month, d.day);
  return buf;
}
inline std::string to_string(const Month& m) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "%04d-%02d", m.year, m.month);
  return buf;
}
inline std::string to_string(const Quarter& q) { return std::to_string(q.year) + "Q" + std::to_string(q.q); }

inline std::string format_timestamp(Timestamp t) {
  const auto day = std::chrono::floor<std::chrono::days>(t);
  const std::chrono::hh_mm_ss hms{t - day};
  const Date d = Date::from_days(day);
  char buf[32];
  std::snprintf(buf, sizeof buf, "%04d-%02d-%02dT%02d:%02d:%02dZ", d.year, d.month, d.day,
                static_cast<int>(hms.hours().count()), static_cast<int>(hms.minutes().count()),
                static_cast<int>(hms.seconds().count()));
  return buf;
}

inline Date parse_date(std::string_view s) {
  Date d;
  char tail = 0;
  const std::string str{s};
  if (std::sscanf(str.c_str(), "%4d-%2d-%2d%c", &d.year, &d.month, &d.day, &tail) != 3 || s.size() != 10 ||
      !d.valid())
    throw ValidationError("invalid ISO date '" + str + "'");
  return d;
}

// Accepts YYYY-MM-DDTHH:MM:SSZ (the "Z" may also be written "+00:00").
inline Timestamp parse_timestamp(std::string_view s) {
  const std::string str{s};
  Date d;
  int hh = 0, mm = 0, ss = 0;
  int consumed = 0;
  if (std::sscanf(str.c_str(), "%4d-%2d-%2dT%2d:%2d:%2d%n", &d.year, &d.month, &d.day, &hh, &mm, &ss, &consumed) !=
          6 ||
      !d.valid() || hh > 23 || mm > 59 || ss > 59)
    throw ValidationError("invalid ISO-8601 UTC timestamp '" + str + "'");
  const std::string_view zone = s.substr(static_cast<std::size_t>(consumed));
  if (zone != "Z" && zone != "+00:00") throw ValidationError("timestamp must be UTC: '" + str + "'");
  return Timestamp{d.days()} + std::chrono::hours{hh} + std::chrono::minutes{mm} + std::chrono::seconds{ss};
}

inline Quarter parse_quarter(std::string_view s) {
  Quarter q;
  char tail = 0;
  const std::string str{s};
  if (std::sscanf(str.c_str(), "%4dQ%1d%c", &q.year, &q.q, &tail) != 2 || q.q < 1 || q.q > 4)
    throw ValidationError("invalid quarter '" + str + "' (expected YYYYQn)");
  return q;
}

// ---------------------------------------------------------------------------
// Randomness. Every stochastic component takes an explicit engine so that a
// run is a pure function of its seed.

using Rng = std::mt19937_64;

// splitmix64 finalizer; decorrelates derived seeds.
constexpr std::uint64_t mix_seed(std::uint64_t x) noexcept {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Seed for stream `tag` / item `index` under a parent seed.
constexpr std::uint64_t derive_seed(std::uint64_t parent, std::uint64_t tag, std::uint64_t index = 0) noexcept {
  return mix_seed(mix_seed(parent ^ mix_seed(tag)) + index);
}

// Uniform in [0, 1) with 53 random bits.
inline double uniform01(Rng& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

inline double uniform(Rng& rng, double lo, double hi) { return lo + (hi - lo) * uniform01(rng); }

// Uniform integer in [0, n); n > 0.
inline std::size_t uniform_index(Rng& rng, std::size_t n) {
  return static_cast<std::size_t>(std::uniform_int_distribution<std::uint64_t>{0, n - 1}(rng));
}

inline int uniform_int(Rng& rng, int lo, int hi) { return std::uniform_int_distribution<int>{lo, hi}(rng); }

inline double normal(Rng& rng, double mean = 0.0, double sd = 1.0) {
  return std::normal_distribution<double>{mean, sd}(rng);
}

template <class Container>
void shuffle(Container& c, Rng& rng) {
  // Fisher-Yates with uniform_index; std::shuffle's draw sequence is not specified.
  for (std::size_t i = c.size(); i > 1; --i) {
    using std::swap;
    swap(c[i - 1], c[uniform_index(rng, i)]);
  }
}

}  // namespace distress
