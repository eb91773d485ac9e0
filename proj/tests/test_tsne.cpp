#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "deepfa/error.hpp"
#include "deepfa/tsne.hpp"
#include "support/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

using namespace deepfa;
using namespace deepfa::tsne;
using deepfa::testing::random_matrix;

namespace {

// Independent long-double recomputations used as oracles.
long double naive_sq_dist(const Matrix& x, std::size_t i, std::size_t j) {
    long double s = 0;
    for (std::size_t c = 0; c < x.cols(); ++c) {
        const long double d = static_cast<long double>(x(i, c)) - x(j, c);
        s += d * d;
    }
    return s;
}

long double naive_kl(const Matrix& p, const Matrix& y) {
    const std::size_t n = p.rows();
    long double z = 0;
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j)
            if (i != j) z += 1.0L / (1.0L + naive_sq_dist(y, i, j));
    long double kl = 0;
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) {
            if (i == j) continue;
            const long double q = 1.0L / (1.0L + naive_sq_dist(y, i, j)) / z;
            kl += p(i, j) * std::log(static_cast<long double>(p(i, j)) / q);
        }
    return kl;
}

Matrix random_joint(std::size_t n, std::uint64_t seed) {
    TsneParams params;
    params.perplexity = std::min(3.0, static_cast<double>(n - 1) / 2.0);
    return joint_affinities(random_matrix(n, 5, seed), params);
}

Matrix uniform_joint(std::size_t n) {
    Matrix p(n, n, 1.0 / static_cast<double>(n * (n - 1)));
    for (std::size_t i = 0; i < n; ++i) p(i, i) = 0.0;
    return p;
}

Matrix equilateral_triangle() {
    return Matrix(3, 2, std::vector<double>{0.0, 0.0, 1.0, 0.0, 0.5, std::sqrt(3.0) / 2.0});
}

double row_perplexity(std::span<const double> row) {
    double h = 0.0;
    for (double v : row)
        if (v > 0.0) h -= v * std::log(v);
    return std::exp(h);
}

double max_rel_error_vs_fd(const Matrix& p, const Matrix& y) {
    const Matrix grad = kl_gradient(p, y);
    const double h = 1e-5;
    double worst = 0.0;
    for (std::size_t i = 0; i < y.rows(); ++i) {
        for (std::size_t c = 0; c < y.cols(); ++c) {
            Matrix plus = y, minus = y;
            plus(i, c) += h;
            minus(i, c) -= h;
            const double fd = (kl_divergence(p, plus) - kl_divergence(p, minus)) / (2 * h);
            const double rel = std::abs(grad(i, c) - fd) / std::max(std::abs(fd), 1e-8);
            worst = std::max(worst, rel);
        }
    }
    return worst;
}

// Accuracy of the best threshold along the first principal axis of Y.
double principal_axis_separability(const Matrix& y, std::span<const int> labels) {
    const std::size_t n = y.rows();
    double mx = 0, my = 0;
    for (std::size_t i = 0; i < n; ++i) {
        mx += y(i, 0);
        my += y(i, 1);
    }
    mx /= n;
    my /= n;
    double sxx = 0, syy = 0, sxy = 0;
    for (std::size_t i = 0; i < n; ++i) {
        const double dx = y(i, 0) - mx, dy = y(i, 1) - my;
        sxx += dx * dx;
        syy += dy * dy;
        sxy += dx * dy;
    }
    const double angle = 0.5 * std::atan2(2 * sxy, sxx - syy);
    std::vector<std::pair<double, int>> proj;
    for (std::size_t i = 0; i < n; ++i)
        proj.emplace_back((y(i, 0) - mx) * std::cos(angle) + (y(i, 1) - my) * std::sin(angle), labels[i]);
    std::sort(proj.begin(), proj.end());
    std::size_t best = 0;
    for (std::size_t cut = 0; cut <= n; ++cut) {
        std::size_t left0 = 0, right1 = 0;
        for (std::size_t k = 0; k < n; ++k) {
            if (k < cut && proj[k].second == 0) ++left0;
            if (k >= cut && proj[k].second == 1) ++right1;
        }
        best = std::max({best, left0 + right1, n - left0 - right1});
    }
    return static_cast<double>(best) / n;
}

}  // namespace

TEST_CASE("pairwise_sq_distances") {
    SUBCASE("unit vectors") {
        const auto d = pairwise_sq_distances(Matrix(2, 2, std::vector<double>{1, 0, 0, 1}));
        CHECK(d(0, 1) == 2.0);
        CHECK(d(1, 0) == 2.0);
        CHECK(d(0, 0) == 0.0);
    }
    SUBCASE("duplicate rows") {
        const auto d = pairwise_sq_distances(Matrix(3, 2, std::vector<double>{1, 2, 3, 4, 1, 2}));
        CHECK(d(0, 2) == 0.0);
        CHECK(d(2, 0) == 0.0);
    }
    SUBCASE("matches a long-double double loop") {
        const auto x = random_matrix(5, 7, 42, 3.0);
        const auto d = pairwise_sq_distances(x);
        for (std::size_t i = 0; i < 5; ++i)
            for (std::size_t j = 0; j < 5; ++j) {
                const long double ref = naive_sq_dist(x, i, j);
                CHECK(d(i, j) >= 0.0);
                if (ref > 0) CHECK(std::abs(static_cast<long double>(d(i, j)) - ref) / ref <= 1e-12L);
                else CHECK(d(i, j) == 0.0);
            }
    }
    SUBCASE("independent of thread count") {
        const auto x = random_matrix(37, 4, 3);
        CHECK(pairwise_sq_distances(x, 1) == pairwise_sq_distances(x, 4));
    }
}

TEST_CASE("calibrate_perplexity") {
    TsneParams params;
    SUBCASE("equilateral triangle is uniform") {
        params.perplexity = 2.0;
        const auto c = calibrate_perplexity(pairwise_sq_distances(equilateral_triangle()), params);
        for (std::size_t i = 0; i < 3; ++i)
            for (std::size_t j = 0; j < 3; ++j)
                CHECK(c.p(i, j) == doctest::Approx(i == j ? 0.0 : 0.5).epsilon(1e-12));
    }
    SUBCASE("random rows reach the target perplexity") {
        params.perplexity = 10.0;
        const auto c = calibrate_perplexity(pairwise_sq_distances(random_matrix(50, 6, 7, 2.0)), params);
        CHECK(c.unconverged.empty());
        for (std::size_t i = 0; i < 50; ++i) {
            double sum = 0.0;
            for (double v : c.p.row(i)) sum += v;
            CHECK(sum == doctest::Approx(1.0).epsilon(1e-9));
            CHECK(c.p(i, i) == 0.0);
            CHECK(std::abs(row_perplexity(c.p.row(i)) - 10.0) < 1e-4);
        }
    }
    SUBCASE("badly scaled rows still converge") {
        params.perplexity = 5.0;
        auto x = random_matrix(30, 3, 8, 1e-4);
        for (std::size_t c = 0; c < 3; ++c) x(0, c) += 1e3;
        const auto c = calibrate_perplexity(pairwise_sq_distances(x), params);
        for (std::size_t i = 0; i < 30; ++i) CHECK(std::abs(row_perplexity(c.p.row(i)) - 5.0) < 1e-4);
    }
    SUBCASE("kernel decreases with distance") {
        params.perplexity = 2.0;
        const auto c = calibrate_perplexity(
            pairwise_sq_distances(Matrix(4, 1, std::vector<double>{0, 1, 2, 10})), params);
        CHECK(c.p(0, 1) > c.p(0, 3));
        CHECK(c.p(1, 0) > c.p(1, 3));
        CHECK(c.p(2, 1) > c.p(2, 3));
        CHECK(c.p(3, 2) > c.p(3, 0));
    }
    SUBCASE("identical points are a degenerate row") {
        params.perplexity = 1.5;
        const std::vector<std::string> ids{"a", "b", "c", "d"};
        try {
            calibrate_perplexity(pairwise_sq_distances(Matrix(4, 2, 1.0)), params, ids);
            FAIL("expected DegenerateRowError");
        } catch (const DegenerateRowError& e) {
            CHECK(std::string(e.what()).find("'a'") != std::string::npos);
        }
    }
    SUBCASE("perplexity above n - 1 is rejected") {
        params.perplexity = 4.0;
        CHECK_THROWS_AS(calibrate_perplexity(pairwise_sq_distances(random_matrix(4, 2, 1)), params),
                        SpecError);
    }
}

TEST_CASE("symmetrize") {
    SUBCASE("uniform conditional rows") {
        Matrix c(3, 3, 0.5);
        for (std::size_t i = 0; i < 3; ++i) c(i, i) = 0.0;
        const auto p = symmetrize(c);
        for (std::size_t i = 0; i < 3; ++i)
            for (std::size_t j = 0; j < 3; ++j)
                CHECK(p(i, j) == doctest::Approx(i == j ? 0.0 : 1.0 / 6.0).epsilon(1e-15));
    }
    SUBCASE("asymmetric 4x4 against direct evaluation") {
        const Matrix c(4, 4, std::vector<double>{0, 0.5, 0.3, 0.2,  //
                                                 0.1, 0, 0.6, 0.3,  //
                                                 0.25, 0.25, 0, 0.5,  //
                                                 0.7, 0.2, 0.1, 0});
        const auto p = symmetrize(c);
        // (c_ij + c_ji) / 8
        CHECK(p(0, 1) == doctest::Approx(0.6 / 8).epsilon(1e-14));
        CHECK(p(0, 2) == doctest::Approx(0.55 / 8).epsilon(1e-14));
        CHECK(p(0, 3) == doctest::Approx(0.9 / 8).epsilon(1e-14));
        CHECK(p(1, 2) == doctest::Approx(0.85 / 8).epsilon(1e-14));
        CHECK(p(1, 3) == doctest::Approx(0.5 / 8).epsilon(1e-14));
        CHECK(p(2, 3) == doctest::Approx(0.6 / 8).epsilon(1e-14));
    }
    SUBCASE("affinity invariants on random inputs") {
        for (std::uint64_t seed = 0; seed < 20; ++seed) {
            const auto p = random_joint(12, seed);
            double sum = 0.0;
            for (std::size_t i = 0; i < 12; ++i) {
                CHECK(p(i, i) == 0.0);
                for (std::size_t j = 0; j < 12; ++j) {
                    CHECK(p(i, j) == p(j, i));
                    CHECK(p(i, j) >= 0.0);
                    if (i != j) CHECK(p(i, j) > 0.0);
                    sum += p(i, j);
                }
            }
            CHECK(std::abs(sum - 1.0) <= 1e-9);
        }
    }
}

TEST_CASE("kl_divergence") {
    SUBCASE("uniform P on an equidistant layout") {
        CHECK(std::abs(kl_divergence(uniform_joint(3), equilateral_triangle())) <= 1e-9);
    }
    SUBCASE("non-negative") {
        for (std::uint64_t seed = 0; seed < 30; ++seed)
            CHECK(kl_divergence(random_joint(9, seed), random_matrix(9, 2, seed + 100)) >= 0.0);
    }
    SUBCASE("matches extended-precision re-summation") {
        const auto p = random_joint(5, 3);
        const auto y = random_matrix(5, 2, 4);
        CHECK(std::abs(static_cast<long double>(kl_divergence(p, y)) - naive_kl(p, y)) <= 1e-10L);
    }
}

TEST_CASE("kl_gradient") {
    SUBCASE("translation invariance: columns sum to zero") {
        for (std::uint64_t seed = 0; seed < 10; ++seed) {
            const auto g = kl_gradient(random_joint(10, seed), random_matrix(10, 2, seed + 50));
            for (std::size_t c = 0; c < 2; ++c) {
                double s = 0.0;
                for (std::size_t i = 0; i < 10; ++i) s += g(i, c);
                CHECK(std::abs(s) <= 1e-10);
            }
        }
    }
    SUBCASE("central finite differences") {
        for (std::size_t n : {6, 8})
            for (std::uint64_t seed = 0; seed < 10; ++seed) {
                CAPTURE(n);
                CAPTURE(seed);
                CHECK(max_rel_error_vs_fd(random_joint(n, seed), random_matrix(n, 2, seed + 9)) < 1e-4);
            }
    }
    SUBCASE("stationary at the symmetric layout") {
        const auto g = kl_gradient(uniform_joint(3), equilateral_triangle());
        for (double v : g.values()) CHECK(std::abs(v) <= 1e-9);
    }
    SUBCASE("exaggeration scales the attractive term") {
        const auto p = random_joint(7, 1);
        const auto y = random_matrix(7, 2, 2);
        Matrix p2 = p;
        for (auto& v : p2.values()) v *= 4.0;
        CHECK(kl_gradient(p, y, 4.0) == kl_gradient(p2, y, 1.0));
    }
}

TEST_CASE("embed") {
    const auto blobs = deepfa::testing::make_two_blobs(25, 10, 10.0, 5);
    TsneParams params;
    params.seed = 17;

    SUBCASE("deterministic and thread independent") {
        const auto a = embed(blobs.features, params);
        const auto b = embed(blobs.features, params);
        CHECK(a.y == b.y);
        params.threads = 3;
        CHECK(embed(blobs.features, params).y == a.y);
    }
    SUBCASE("separates two blobs along the principal axis") {
        const auto e = embed(blobs.features, params);
        CHECK(principal_axis_separability(e.y, blobs.labels) >= 0.96);
    }
    SUBCASE("loss trace") {
        const auto e = embed(blobs.features, params);
        REQUIRE(e.loss.size() == 1001);
        for (const auto& l : e.loss) CHECK(std::isfinite(l.kl));
        CHECK(e.loss[1000].iteration == 1000);
        CHECK(e.loss[1000].kl <= e.loss[250].kl);
    }
    SUBCASE("invariant to translating every row") {
        // Dyadic values keep the shifted differences exact.
        Matrix x(20, 3);
        for (std::size_t i = 0; i < 20; ++i)
            for (std::size_t c = 0; c < 3; ++c) x(i, c) = static_cast<double>((i * 7 + c * 13) % 17) / 8.0;
        Matrix shifted = x;
        for (auto& v : shifted.values()) v += 64.0;
        params.iterations = 300;
        CHECK(embed(x, params).y == embed(shifted, params).y);
    }
    SUBCASE("too few samples") {
        CHECK_THROWS_AS(embed(random_matrix(3, 2, 1), params), DimensionError);
    }
    SUBCASE("divergence is reported with its iteration") {
        params.learning_rate = 1e300;
        params.iterations = 50;
        CHECK_THROWS_AS(embed(blobs.features, params), DivergenceError);
    }
}
