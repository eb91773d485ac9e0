#pragma once

// Test-only reference for bottleneck path costs. Kept apart from the forest
// code so checks against it stay independent.

#include "deepfa/matrix.hpp"
#include "deepfa/opf_semi.hpp"

namespace deepfa::opf::oracle {

inline constexpr std::size_t kMaxOracleSize = 256;

// Floyd-Warshall min-max closure per class; K x n costs. n <= kMaxOracleSize.
Matrix minimax_costs(const Matrix& points, const SeedSet& seeds);

}  // namespace deepfa::opf::oracle
