#include "deepfa/tsne.hpp"

#include "deepfa/csv.hpp"
#include "deepfa/error.hpp"
#include "deepfa/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

namespace deepfa::tsne {

namespace {

constexpr double kAffinityFloor = 1e-12;

std::string sample_name(std::span<const std::string> ids, std::size_t i) {
    return i < ids.size() ? "'" + ids[i] + "'" : "#" + std::to_string(i);
}

struct RowKernel {
    double entropy;  // nats
    double sum;
};

// Fills out[j] = exp(-(d_j - d_min) * beta) for j != i and returns entropy and normalizer.
RowKernel row_kernel(std::span<const double> d, std::size_t i, double d_min, double beta,
                     std::span<double> out) {
    double sum = 0.0;
    double weighted = 0.0;
    for (std::size_t j = 0; j < d.size(); ++j) {
        if (j == i) {
            out[j] = 0.0;
            continue;
        }
        const double shifted = d[j] - d_min;
        const double v = std::exp(-shifted * beta);
        out[j] = v;
        sum += v;
        weighted += shifted * v;
    }
    // H = log(sum) + beta * E[d - d_min]
    return {std::log(sum) + beta * weighted / sum, sum};
}

// Q numerators (1 + |yi - yj|^2)^-1 with diagonal 0, plus the row sums.
Matrix student_kernel(const Matrix& y, std::vector<double>& row_sums, int threads) {
    const std::size_t n = y.rows();
    Matrix num(n, n);
    row_sums.assign(n, 0.0);
    parallel_for(n, threads, [&](std::size_t i) {
        double s = 0.0;
        for (std::size_t j = 0; j < n; ++j) {
            if (j == i) continue;
            double d2 = 0.0;
            for (std::size_t c = 0; c < y.cols(); ++c) {
                const double diff = y(i, c) - y(j, c);
                d2 += diff * diff;
            }
            const double v = 1.0 / (1.0 + d2);
            num(i, j) = v;
            s += v;
        }
        row_sums[i] = s;
    });
    return num;
}

double ordered_sum(const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s += x;
    return s;
}

double kl_from_kernel(const Matrix& p, const Matrix& num, double z, int threads) {
    const std::size_t n = p.rows();
    std::vector<double> rows(n, 0.0);
    const double log_z = std::log(z);
    parallel_for(n, threads, [&](std::size_t i) {
        double s = 0.0;
        for (std::size_t j = 0; j < n; ++j) {
            const double pij = p(i, j);
            if (j == i || pij <= 0.0) continue;
            // log(P / Q) with Q = num / Z
            s += pij * (std::log(pij) - std::log(num(i, j)) + log_z);
        }
        rows[i] = s;
    });
    return ordered_sum(rows);
}

void gradient_from_kernel(const Matrix& p, const Matrix& y, const Matrix& num, double z,
                          double exaggeration, Matrix& grad, int threads) {
    const std::size_t n = p.rows();
    const std::size_t dims = y.cols();
    parallel_for(n, threads, [&](std::size_t i) {
        auto g = grad.row(i);
        std::fill(g.begin(), g.end(), 0.0);
        for (std::size_t j = 0; j < n; ++j) {
            if (j == i) continue;
            const double w = num(i, j);
            const double coeff = (exaggeration * p(i, j) - w / z) * w;
            for (std::size_t c = 0; c < dims; ++c) g[c] += coeff * (y(i, c) - y(j, c));
        }
        for (std::size_t c = 0; c < dims; ++c) g[c] *= 4.0;
    });
}

}  // namespace

void TsneParams::validate() const {
    auto positive = [](double v) { return std::isfinite(v) && v > 0.0; };
    if (!positive(perplexity)) throw SpecError("t-SNE perplexity must be positive");
    if (iterations < 1) throw SpecError("t-SNE iterations must be >= 1");
    if (!positive(early_exaggeration_factor)) throw SpecError("early exaggeration must be positive");
    if (exaggeration_iterations < 0) throw SpecError("exaggeration iterations must be >= 0");
    if (!positive(learning_rate)) throw SpecError("t-SNE learning rate must be positive");
    if (!(initial_momentum >= 0.0 && initial_momentum < 1.0) ||
        !(final_momentum >= 0.0 && final_momentum < 1.0))
        throw SpecError("t-SNE momentum must lie in [0, 1)");
    if (!positive(perplexity_tolerance)) throw SpecError("perplexity tolerance must be positive");
    if (max_bisection_steps < 1) throw SpecError("max bisection steps must be >= 1");
    if (!positive(init_sigma)) throw SpecError("init sigma must be positive");
    if (!(min_gain > 0.0 && min_gain <= 1.0)) throw SpecError("min gain must lie in (0, 1]");
}

Matrix pairwise_sq_distances(const Matrix& x, int threads) {
    const std::size_t n = x.rows();
    Matrix d(n, n);
    parallel_for(n, threads, [&](std::size_t i) {
        auto xi = x.row(i);
        for (std::size_t j = 0; j < n; ++j) {
            if (j == i) continue;
            auto xj = x.row(j);
            double s = 0.0;
            for (std::size_t c = 0; c < xi.size(); ++c) {
                const double diff = xi[c] - xj[c];
                s += diff * diff;
            }
            d(i, j) = s;
        }
    });
    return d;
}

ConditionalAffinities calibrate_perplexity(const Matrix& sq_dist, const TsneParams& params,
                                           std::span<const std::string> ids) {
    params.validate();
    const std::size_t n = sq_dist.rows();
    if (n < 2 || sq_dist.cols() != n) throw DimensionError("distance matrix must be square, n >= 2");
    if (params.perplexity > static_cast<double>(n - 1))
        throw SpecError("perplexity " + csv::format_real(params.perplexity) +
                        " exceeds the maximum n - 1 = " + std::to_string(n - 1));

    ConditionalAffinities out;
    out.p = Matrix(n, n);
    out.beta.assign(n, 0.0);
    out.achieved_perplexity.assign(n, 0.0);
    std::vector<char> converged(n, 0);
    const double target = params.perplexity;

    parallel_for(n, params.threads, [&](std::size_t i) {
        auto d = sq_dist.row(i);
        double d_min = std::numeric_limits<double>::infinity();
        double d_max = 0.0;
        double d_sum = 0.0;
        for (std::size_t j = 0; j < n; ++j) {
            if (j == i) continue;
            d_min = std::min(d_min, d[j]);
            d_max = std::max(d_max, d[j]);
            d_sum += d[j];
        }
        auto row = out.p.row(i);
        if (d_max <= 0.0)
            throw DegenerateRowError("t-SNE: sample " + sample_name(ids, i) +
                                     " is identical to every other sample");

        // Start from the distance to the perplexity-th neighbour so the search
        // begins at the row's own scale.
        std::vector<double> others;
        others.reserve(n - 1);
        for (std::size_t j = 0; j < n; ++j)
            if (j != i) others.push_back(d[j]);
        const auto kth = std::min(others.size() - 1,
                                static_cast<std::size_t>(std::max(1.0, std::ceil(target))) - 1);
        std::nth_element(others.begin(), others.begin() + static_cast<std::ptrdiff_t>(kth), others.end());
        const double scale = others[kth];
        double beta = scale > 0.0 ? 1.0 / scale : static_cast<double>(n - 1) / d_sum;
        double lo = 0.0;
        double hi = std::numeric_limits<double>::infinity();
        RowKernel k{};
        double perp = 0.0;
        bool ok = false;
        for (int step = 0; step < params.max_bisection_steps; ++step) {
            k = row_kernel(d, i, d_min, beta, row);
            perp = std::exp(k.entropy);
            if (std::abs(perp - target) < params.perplexity_tolerance) {
                ok = true;
                break;
            }
            if (perp > target) {  // kernel too wide
                lo = beta;
                beta = std::isinf(hi) ? beta * 2.0 : 0.5 * (beta + hi);
            } else {
                hi = beta;
                beta = 0.5 * (beta + lo);
            }
        }
        if (!ok) {
            k = row_kernel(d, i, d_min, beta, row);
            perp = std::exp(k.entropy);
            ok = std::abs(perp - target) < params.perplexity_tolerance;
        }
        for (std::size_t j = 0; j < n; ++j) row[j] /= k.sum;
        out.beta[i] = beta;
        out.achieved_perplexity[i] = perp;
        converged[i] = ok ? 1 : 0;
    });
    for (std::size_t i = 0; i < n; ++i)
        if (!converged[i]) out.unconverged.push_back(i);
    return out;
}

Matrix symmetrize(const Matrix& conditional) {
    const std::size_t n = conditional.rows();
    if (conditional.cols() != n) throw DimensionError("conditional matrix must be square");
    Matrix p(n, n);
    const double denom = 2.0 * static_cast<double>(n);
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            if (i == j) continue;
            const double v = std::max((conditional(i, j) + conditional(j, i)) / denom, kAffinityFloor);
            p(i, j) = v;
            total += v;
        }
    }
    for (auto& v : p.values()) v /= total;
    return p;
}

Matrix joint_affinities(const Matrix& x, const TsneParams& params, std::span<const std::string> ids) {
    return symmetrize(calibrate_perplexity(pairwise_sq_distances(x, params.threads), params, ids).p);
}

double kl_divergence(const Matrix& p, const Matrix& y, int threads) {
    if (p.rows() != y.rows() || p.cols() != p.rows())
        throw DimensionError("kl_divergence: P and Y shapes disagree");
    std::vector<double> row_sums;
    const Matrix num = student_kernel(y, row_sums, threads);
    return kl_from_kernel(p, num, ordered_sum(row_sums), threads);
}

Matrix kl_gradient(const Matrix& p, const Matrix& y, double exaggeration, int threads) {
    if (p.rows() != y.rows() || p.cols() != p.rows())
        throw DimensionError("kl_gradient: P and Y shapes disagree");
    std::vector<double> row_sums;
    const Matrix num = student_kernel(y, row_sums, threads);
    Matrix grad(y.rows(), y.cols());
    gradient_from_kernel(p, y, num, ordered_sum(row_sums), exaggeration, grad, threads);
    return grad;
}

Embedding embed(const Matrix& x, const TsneParams& params_in, std::span<const std::string> ids) {
    const std::size_t n = x.rows();
    if (n < 4) throw DimensionError("t-SNE needs at least 4 samples, got " + std::to_string(n));
    TsneParams params = params_in;
    params.validate();
    params.perplexity = std::min(params.perplexity, static_cast<double>(n - 1) / 3.0);

    const Matrix p = joint_affinities(x, params, ids);

    Embedding out;
    out.y = Matrix(n, 2);
    std::mt19937_64 rng(params.seed);
    std::normal_distribution<double> normal(0.0, params.init_sigma);
    for (auto& v : out.y.values()) v = normal(rng);

    Matrix velocity(n, 2);
    Matrix gains(n, 2, 1.0);
    Matrix grad(n, 2);
    std::vector<double> row_sums;
    out.loss.reserve(static_cast<std::size_t>(params.iterations) + 1);

    for (int it = 0; it < params.iterations; ++it) {
        const Matrix num = student_kernel(out.y, row_sums, params.threads);
        const double z = ordered_sum(row_sums);
        const double kl = kl_from_kernel(p, num, z, params.threads);
        if (!std::isfinite(kl))
            throw DivergenceError("t-SNE: non-finite loss at iteration " + std::to_string(it), it);
        out.loss.push_back({it, kl});

        const double exaggeration =
            it < params.exaggeration_iterations ? params.early_exaggeration_factor : 1.0;
        const double momentum =
            it < params.momentum_switch_iteration ? params.initial_momentum : params.final_momentum;
        gradient_from_kernel(p, out.y, num, z, exaggeration, grad, params.threads);

        auto g = grad.values();
        auto v = velocity.values();
        auto gain = gains.values();
        auto y = out.y.values();
        for (std::size_t k = 0; k < y.size(); ++k) {
            const bool same_sign = (g[k] > 0.0) == (v[k] > 0.0);
            gain[k] = same_sign ? gain[k] * 0.8 : gain[k] + 0.2;
            gain[k] = std::max(gain[k], params.min_gain);
            v[k] = momentum * v[k] - params.learning_rate * gain[k] * g[k];
            y[k] += v[k];
        }
        for (std::size_t c = 0; c < 2; ++c) {
            double mean = 0.0;
            for (std::size_t i = 0; i < n; ++i) mean += out.y(i, c);
            mean /= static_cast<double>(n);
            for (std::size_t i = 0; i < n; ++i) out.y(i, c) -= mean;
        }
    }
    const double final_kl = kl_divergence(p, out.y, params.threads);
    if (!std::isfinite(final_kl))
        throw DivergenceError("t-SNE: non-finite loss at iteration " +
                                  std::to_string(params.iterations),
                              params.iterations);
    out.loss.push_back({params.iterations, final_kl});
    for (double v : out.y.values())
        if (!std::isfinite(v))
            throw DivergenceError("t-SNE: non-finite embedding after optimization", params.iterations);
    return out;
}

}  // namespace deepfa::tsne
