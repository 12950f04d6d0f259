#pragma once

namespace edwait {

/// Rounds a granular prediction into the displayed 30-minute block. A value
/// within 3 minutes below a block boundary already displays that block, so
/// 57..86.99 shows 60 and 30..56.99 shows 30. The result is clamped to
/// [floor, cap]. Throws std::invalid_argument for negative or non-finite input.
int coarsen_wait(double granular_min, int floor_min, int cap_min);

/// Granular value at which the display steps up from block `j` to `j + 1`
/// (57 for j = 1, 87 for j = 2, ...).
constexpr double display_step_point(int j) { return 30.0 * (j + 1) - 3.0; }

}  // namespace edwait
