#include "hhf/common.hpp"

#include <charconv>
#include <chrono>
#include <cstdio>

namespace hhf {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::CorruptHeader: return "CorruptHeader";
    case ErrorCode::LengthMismatch: return "LengthMismatch";
    case ErrorCode::BadSampleRate: return "BadSampleRate";
    case ErrorCode::TooShort: return "TooShort";
    case ErrorCode::Io: return "Io";
    case ErrorCode::BadPattern: return "BadPattern";
    case ErrorCode::BadDate: return "BadDate";
    case ErrorCode::BadCsv: return "BadCsv";
    case ErrorCode::DegenerateSplit: return "DegenerateSplit";
    case ErrorCode::OffsetOutOfRange: return "OffsetOutOfRange";
    case ErrorCode::ShapeMismatch: return "ShapeMismatch";
    case ErrorCode::AllMasked: return "AllMasked";
    case ErrorCode::IncompatibleCheckpoint: return "IncompatibleCheckpoint";
    case ErrorCode::EmptySplit: return "EmptySplit";
    case ErrorCode::NoAttentionCaptured: return "NoAttentionCaptured";
    case ErrorCode::NoBeatsFound: return "NoBeatsFound";
    case ErrorCode::TooFewBeats: return "TooFewBeats";
    case ErrorCode::DegenerateClusters: return "DegenerateClusters";
    case ErrorCode::InsufficientValidData: return "InsufficientValidData";
    case ErrorCode::NoBeatsDetected: return "NoBeatsDetected";
    case ErrorCode::MissingVariable: return "MissingVariable";
    case ErrorCode::BadCoefficients: return "BadCoefficients";
    case ErrorCode::SingleClass: return "SingleClass";
    case ErrorCode::ZeroExposure: return "ZeroExposure";
    case ErrorCode::EmptyBin: return "EmptyBin";
    case ErrorCode::BadConfig: return "BadConfig";
  }
  return "Unknown";
}

namespace {

bool parse_uint(std::string_view s, unsigned& out) {
  if (s.empty()) return false;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc() && p == s.data() + s.size();
}

}  // namespace

Date Date::from_ymd(int year, unsigned month, unsigned day) {
  using namespace std::chrono;
  const year_month_day ymd{std::chrono::year{year}, std::chrono::month{month}, std::chrono::day{day}};
  if (!ymd.ok()) {
    throw Error(ErrorCode::BadDate, std::to_string(year) + "-" + std::to_string(month) + "-" + std::to_string(day));
  }
  return Date(static_cast<std::int32_t>(sys_days{ymd}.time_since_epoch().count()));
}

Date Date::parse(std::string_view text) {
  const auto t = trim(text);
  unsigned y = 0, m = 0, d = 0;
  if (t.size() != 10 || t[4] != '-' || t[7] != '-' || !parse_uint(std::string_view(t).substr(0, 4), y) ||
      !parse_uint(std::string_view(t).substr(5, 2), m) || !parse_uint(std::string_view(t).substr(8, 2), d)) {
    throw Error(ErrorCode::BadDate, "'" + t + "'");
  }
  return from_ymd(static_cast<int>(y), m, d);
}

static std::chrono::year_month_day to_ymd(std::int32_t days) {
  return std::chrono::year_month_day{std::chrono::sys_days{std::chrono::days{days}}};
}

int Date::year() const { return static_cast<int>(to_ymd(days_).year()); }
unsigned Date::month() const { return static_cast<unsigned>(to_ymd(days_).month()); }
unsigned Date::day() const { return static_cast<unsigned>(to_ymd(days_).day()); }

std::string Date::iso() const {
  char buf[16];
  std::snprintf(buf, sizeof buf, "%04d-%02u-%02u", year(), month(), day());
  return buf;
}

DateTime DateTime::parse(std::string_view text) {
  const auto t = trim(text);
  unsigned hh = 0, mm = 0;
  if (t.size() != 16 || (t[10] != 'T' && t[10] != ' ') || t[13] != ':' ||
      !parse_uint(std::string_view(t).substr(11, 2), hh) || !parse_uint(std::string_view(t).substr(14, 2), mm) ||
      hh > 23 || mm > 59) {
    throw Error(ErrorCode::BadDate, "'" + t + "'");
  }
  return DateTime{Date::parse(std::string_view(t).substr(0, 10)), static_cast<int>(hh * 60 + mm)};
}

std::string DateTime::iso() const {
  char buf[32];
  std::snprintf(buf, sizeof buf, "T%02d:%02d", minute_of_day / 60, minute_of_day % 60);
  return date.iso() + buf;
}

std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b) {
  // splitmix64 finalizer over a combined word
  std::uint64_t z = a * 0x9E3779B97F4A7C15ull + b + 0x632BE59BD9B4E019ull;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

std::uint64_t mix_seed(std::uint64_t a, std::string_view s) {
  std::uint64_t h = 1469598103934665603ull;  // FNV-1a
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return mix_seed(a, h);
}

std::string trim(std::string_view s) {
  std::size_t b = 0, e = s.size();
  while (b < e && (s[b] == ' ' || s[b] == '\t' || s[b] == '\r' || s[b] == '\n')) ++b;
  while (e > b && (s[e - 1] == ' ' || s[e - 1] == '\t' || s[e - 1] == '\r' || s[e - 1] == '\n')) --e;
  return std::string(s.substr(b, e - b));
}

}  // namespace hhf
