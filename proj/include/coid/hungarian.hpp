#pragma once

#include <vector>

#include "coid/tensor.hpp"

namespace coid {

/// Minimum-cost assignment on a rectangular cost matrix. Returns, for each
/// row, the assigned column or -1 when the row is left over (rows > cols).
/// Exactly min(rows, cols) rows are assigned.
std::vector<int> hungarian(const Matrix& cost);

}  // namespace coid
