#include "edwait/timefmt.hpp"

#include <charconv>
#include <chrono>
#include <cstdio>
#include <stdexcept>

namespace edwait {
namespace {

int read_fixed(std::string_view text, std::size_t pos, std::size_t width, std::string_view whole) {
  if (pos + width > text.size()) throw std::invalid_argument("truncated timestamp: " + std::string(whole));
  int value = 0;
  const char* first = text.data() + pos;
  auto [ptr, ec] = std::from_chars(first, first + width, value);
  if (ec != std::errc{} || ptr != first + width) {
    throw std::invalid_argument("malformed timestamp: " + std::string(whole));
  }
  return value;
}

void expect(std::string_view text, std::size_t pos, char c, std::string_view whole) {
  if (pos >= text.size() || text[pos] != c) {
    throw std::invalid_argument("malformed timestamp: " + std::string(whole));
  }
}

}  // namespace

EpochMinutes parse_iso_minutes(std::string_view text) {
  const std::string_view whole = text;
  const int year = read_fixed(text, 0, 4, whole);
  expect(text, 4, '-', whole);
  const int month = read_fixed(text, 5, 2, whole);
  expect(text, 7, '-', whole);
  const int day = read_fixed(text, 8, 2, whole);
  if (text.size() < 11 || (text[10] != 'T' && text[10] != ' ')) {
    throw std::invalid_argument("malformed timestamp: " + std::string(whole));
  }
  const int hour = read_fixed(text, 11, 2, whole);
  expect(text, 13, ':', whole);
  const int minute = read_fixed(text, 14, 2, whole);

  std::size_t pos = 16;
  if (pos < text.size() && text[pos] == ':') {
    const int second = read_fixed(text, pos + 1, 2, whole);
    if (second > 60) throw std::invalid_argument("malformed timestamp: " + std::string(whole));
    pos += 3;
    if (pos < text.size() && text[pos] == '.') {
      ++pos;
      while (pos < text.size() && text[pos] >= '0' && text[pos] <= '9') ++pos;
    }
  }
  if (pos < text.size() && text[pos] == 'Z') ++pos;
  if (pos != text.size()) throw std::invalid_argument("trailing characters in timestamp: " + std::string(whole));

  using namespace std::chrono;
  const year_month_day ymd{std::chrono::year{year}, std::chrono::month{static_cast<unsigned>(month)},
                           std::chrono::day{static_cast<unsigned>(day)}};
  if (!ymd.ok() || hour > 23 || minute > 59) {
    throw std::invalid_argument("timestamp out of range: " + std::string(whole));
  }
  const auto days_since_epoch = sys_days{ymd}.time_since_epoch().count();
  return static_cast<EpochMinutes>(days_since_epoch) * 1440 + hour * 60 + minute;
}

std::string format_iso_minutes(EpochMinutes t) {
  using namespace std::chrono;
  EpochMinutes days = t / 1440;
  EpochMinutes rem = t % 1440;
  if (rem < 0) {
    rem += 1440;
    --days;
  }
  const year_month_day ymd{sys_days{std::chrono::days{days}}};
  char buf[32];
  std::snprintf(buf, sizeof buf, "%04d-%02u-%02uT%02d:%02d", static_cast<int>(ymd.year()),
                static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()),
                static_cast<int>(rem / 60), static_cast<int>(rem % 60));
  return buf;
}

}  // namespace edwait
