#pragma once

// Small statistics helpers shared by the score module and the test suites.

#include "daa/common.hpp"

#include <vector>

namespace daa {

/// Spearman rank correlation with average ranks for ties.
double spearman(const std::vector<double>& xs, const std::vector<double>& ys);

/// Symmetric Hausdorff distance between finite point sets.
double hausdorff(const std::vector<Vec>& a, const std::vector<Vec>& b);

/// One-sided Hausdorff distance: sup over `from` of the distance to `to`.
/// Use with a dense reference sample when `to` stands in for a manifold.
double directed_hausdorff(const std::vector<Vec>& from, const std::vector<Vec>& to);

}  // namespace daa
