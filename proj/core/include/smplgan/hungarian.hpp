#pragma once

#include "smplgan/types.hpp"

#include <vector>

namespace smplgan {

struct Assignment {
  std::vector<int> row_to_col;  // one column per row
  double cost = 0.0;
};

// Minimum-cost assignment of every row to a distinct column; requires
// rows <= cols. O(rows^2 * cols) shortest augmenting paths with potentials.
Assignment solve_assignment(const Matrix& cost);

}  // namespace smplgan
