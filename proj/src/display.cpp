#include "edwait/display.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace edwait {

int coarsen_wait(double granular_min, int floor_min, int cap_min) {
  if (!std::isfinite(granular_min) || granular_min < 0.0) {
    throw std::invalid_argument("granular wait must be finite and non-negative, got " +
                                std::to_string(granular_min));
  }
  if (floor_min > cap_min) throw std::invalid_argument("display floor exceeds cap");

  // Largest b with 30b - 3 <= g. The floating estimate is corrected against the
  // integer step points so the comparison itself is exact.
  auto block = static_cast<long long>(std::floor((granular_min + 3.0) / 30.0));
  while (block > 0 && 30.0 * static_cast<double>(block) - 3.0 > granular_min) --block;
  while (30.0 * static_cast<double>(block + 1) - 3.0 <= granular_min) ++block;

  const long long shown = 30 * block;
  return static_cast<int>(std::clamp<long long>(shown, floor_min, cap_min));
}

}  // namespace edwait
