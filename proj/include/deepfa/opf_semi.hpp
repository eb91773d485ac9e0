#pragma once

#include "deepfa/matrix.hpp"

#include <cstddef>
#include <limits>
#include <span>
#include <vector>

namespace deepfa::opf {

inline constexpr std::size_t kNoPredecessor = std::numeric_limits<std::size_t>::max();

// Supervised samples acting as forest roots.
struct SeedSet {
    std::vector<std::size_t> indices;
    std::vector<int> labels;
    int num_classes = 0;

    // Throws SeedError unless non-empty, unique, in range and covering every class.
    void validate(std::size_t n) const;
};

struct PathForest {
    std::vector<std::size_t> predecessor;  // kNoPredecessor for seeds
    std::vector<double> cost;              // bottleneck cost from the root
    std::vector<std::size_t> root;
    std::vector<int> assigned_label;
    Matrix class_costs;                    // num_classes x n

    std::size_t size() const noexcept { return cost.size(); }
};

// Minimum-cost path forest on the complete Euclidean graph over `points`
// (one row per sample), where a path costs its largest arc. Equal costs are
// resolved in favour of the node reached first.
PathForest propagate_labels(const Matrix& points, const SeedSet& seeds);

// Row k: bottleneck costs when only class-k seeds exist.
Matrix per_class_costs(const Matrix& points, const SeedSet& seeds);

// Margin between the assigned class and the best competing class, mapped to
// [0, 1]. Supervised samples get 1.
std::vector<double> confidence(const Matrix& class_costs, std::span<const int> assigned_label,
                               const std::vector<bool>& supervised);

}  // namespace deepfa::opf
