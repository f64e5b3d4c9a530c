#pragma once

#include <vector>

#include "tot/tensor.hpp"

namespace tot {

// Exact min-cost perfect assignment on a square cost matrix (O(n^3),
// shortest-augmenting-path with potentials). Returns column assigned to each
// row.
std::vector<int> min_cost_assignment(const Tensor& cost);

// Column assigned to each row maximizing the total, used for correlation
// matching (negated costs).
std::vector<int> max_sum_assignment(const Tensor& score);

}  // namespace tot
