#pragma once

#include <string>
#include <string_view>

#include "edwait/core.hpp"

namespace edwait {

/// Parses `YYYY-MM-DDTHH:MM[:SS[.fff]][Z]` (a space may replace `T`).
/// Seconds are truncated. Throws std::invalid_argument on malformed input.
EpochMinutes parse_iso_minutes(std::string_view text);

/// Formats as `YYYY-MM-DDTHH:MM`.
std::string format_iso_minutes(EpochMinutes t);

}  // namespace edwait
