#pragma once

#include <istream>
#include <optional>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

namespace edwait::csv {

/// Splits one line on commas. Double-quoted fields may contain commas and
/// doubled quotes. A trailing carriage return is dropped.
std::vector<std::string> split_line(std::string_view line);

/// Reads the next non-empty line; returns false at end of stream.
bool read_row(std::istream& in, std::vector<std::string>& fields, std::size_t& line_no);

std::string trim(std::string_view s);

/// Shortest decimal text that parses back to the identical double.
std::string format_double(double value);

std::optional<double> parse_double(std::string_view text);
std::optional<long long> parse_int(std::string_view text);

}  // namespace edwait::csv
