#pragma once

#include "deepfa/dataset.hpp"

#include <cmath>
#include <random>
#include <string>

namespace deepfa::testing {

// K isotropic Gaussian blobs (sigma 1) in `dim` dimensions. Class k is centred
// at (separation / sqrt 2) * e_k, so every pair of centres is `separation` apart.
inline Dataset make_blobs(std::size_t n, std::size_t num_classes, std::size_t dim, double separation,
                          std::uint64_t seed) {
    Dataset ds;
    for (std::size_t k = 0; k < num_classes; ++k) ds.class_names.push_back("c" + std::to_string(k));
    ds.features = Matrix(n, dim);
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> noise(0.0, 1.0);
    const double offset = separation / std::sqrt(2.0);
    for (std::size_t i = 0; i < n; ++i) {
        const auto k = i % num_classes;
        ds.ids.push_back("s" + std::to_string(i));
        ds.labels.push_back(static_cast<int>(k));
        for (std::size_t c = 0; c < dim; ++c) ds.features(i, c) = noise(rng) + (c == k ? offset : 0.0);
    }
    return ds;
}

// Two blobs separated along the first axis by `separation`.
inline Dataset make_two_blobs(std::size_t per_class, std::size_t dim, double separation, std::uint64_t seed) {
    Dataset ds;
    ds.class_names = {"a", "b"};
    ds.features = Matrix(2 * per_class, dim);
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> noise(0.0, 1.0);
    for (std::size_t i = 0; i < 2 * per_class; ++i) {
        const int k = i < per_class ? 0 : 1;
        ds.ids.push_back("p" + std::to_string(i));
        ds.labels.push_back(k);
        for (std::size_t c = 0; c < dim; ++c)
            ds.features(i, c) = noise(rng) + (c == 0 && k == 1 ? separation : 0.0);
    }
    return ds;
}

inline Matrix random_matrix(std::size_t rows, std::size_t cols, std::uint64_t seed, double scale = 1.0) {
    Matrix m(rows, cols);
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> noise(0.0, scale);
    for (auto& v : m.values()) v = noise(rng);
    return m;
}

}  // namespace deepfa::testing
