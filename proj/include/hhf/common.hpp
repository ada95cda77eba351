#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>

namespace hhf {

enum class ErrorCode {
  CorruptHeader,
  LengthMismatch,
  BadSampleRate,
  TooShort,
  Io,
  BadPattern,
  BadDate,
  BadCsv,
  DegenerateSplit,
  OffsetOutOfRange,
  ShapeMismatch,
  AllMasked,
  IncompatibleCheckpoint,
  EmptySplit,
  NoAttentionCaptured,
  NoBeatsFound,
  TooFewBeats,
  DegenerateClusters,
  InsufficientValidData,
  NoBeatsDetected,
  MissingVariable,
  BadCoefficients,
  SingleClass,
  ZeroExposure,
  EmptyBin,
  BadConfig,
};

std::string_view to_string(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}
  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

// Calendar date stored as days since 1970-01-01.
class Date {
 public:
  constexpr Date() = default;
  constexpr explicit Date(std::int32_t days) : days_(days) {}

  static Date from_ymd(int year, unsigned month, unsigned day);
  // Accepts YYYY-MM-DD; throws Error(BadDate).
  static Date parse(std::string_view text);

  std::int32_t days() const noexcept { return days_; }
  int year() const;
  unsigned month() const;
  unsigned day() const;
  std::string iso() const;

  friend constexpr Date operator+(Date d, std::int32_t n) { return Date(d.days_ + n); }
  friend constexpr Date operator-(Date d, std::int32_t n) { return Date(d.days_ - n); }
  friend constexpr std::int32_t operator-(Date a, Date b) { return a.days_ - b.days_; }
  friend constexpr auto operator<=>(Date, Date) = default;

 private:
  std::int32_t days_ = 0;
};

// Local wall-clock timestamp with minute precision.
struct DateTime {
  Date date;
  int minute_of_day = 0;  // [0, 1440)

  static DateTime parse(std::string_view text);  // YYYY-MM-DDTHH:MM
  std::string iso() const;
  friend constexpr bool operator==(const DateTime&, const DateTime&) = default;
};

// One year / two years / five years as used for clinical date windows.
inline constexpr std::int32_t kDaysPerYear = 365;
inline constexpr std::int32_t kFiveYearDays = 1826;

// Deterministic 64-bit mixing used to derive per-item seeds.
std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b);
std::uint64_t mix_seed(std::uint64_t a, std::string_view s);

std::string trim(std::string_view s);

}  // namespace hhf
