#pragma once

#include "deepfa/matrix.hpp"

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace deepfa::tsne {

struct TsneParams {
    double perplexity = 30.0;  // clamped to (n - 1) / 3 by embed()
    int iterations = 1000;
    double early_exaggeration_factor = 12.0;
    int exaggeration_iterations = 250;
    double learning_rate = 200.0;
    double initial_momentum = 0.5;
    double final_momentum = 0.8;
    int momentum_switch_iteration = 250;
    double perplexity_tolerance = 1e-5;
    int max_bisection_steps = 50;
    double init_sigma = 1e-4;
    double min_gain = 0.01;
    std::uint64_t seed = 0;
    int threads = 1;

    void validate() const;
};

// Squared Euclidean distances, diagonal exactly 0.
Matrix pairwise_sq_distances(const Matrix& x, int threads = 1);

struct ConditionalAffinities {
    Matrix p;                              // row i holds p(j|i)
    std::vector<double> beta;              // precision of each row's kernel
    std::vector<double> achieved_perplexity;
    std::vector<std::size_t> unconverged;  // rows that hit max_bisection_steps
};

// Bisects each row's kernel precision to hit params.perplexity. `ids` (optional)
// names samples in DegenerateRowError messages.
ConditionalAffinities calibrate_perplexity(const Matrix& sq_dist, const TsneParams& params,
                                           std::span<const std::string> ids = {});

// P = (C + C^T) / 2n, off-diagonal entries floored at 1e-12, renormalized to sum 1.
Matrix symmetrize(const Matrix& conditional);

// Joint P matrix straight from features.
Matrix joint_affinities(const Matrix& x, const TsneParams& params,
                        std::span<const std::string> ids = {});

double kl_divergence(const Matrix& p, const Matrix& y, int threads = 1);

// Gradient of KL(P || Q) w.r.t. Y. `exaggeration` scales P (early exaggeration).
Matrix kl_gradient(const Matrix& p, const Matrix& y, double exaggeration = 1.0, int threads = 1);

struct LossPoint {
    int iteration;
    double kl;
};

struct Embedding {
    Matrix y;                     // n x 2
    std::vector<LossPoint> loss;  // KL before update t (t = 0..iterations-1) and after the last
};

Embedding embed(const Matrix& x, const TsneParams& params, std::span<const std::string> ids = {});

}  // namespace deepfa::tsne
