#include "deepfa/opf_oracle.hpp"

#include "deepfa/error.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace deepfa::opf::oracle {

Matrix minimax_costs(const Matrix& points, const SeedSet& seeds) {
    const std::size_t n = points.rows();
    if (n > kMaxOracleSize) throw SpecError("minimax oracle is limited to 256 samples");
    seeds.validate(n);

    // Closure over all pairs: w[i][j] <- min(w[i][j], max(w[i][k], w[k][j])).
    Matrix w(n, n);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            double s = 0.0;
            for (std::size_t c = 0; c < points.cols(); ++c) {
                const double diff = points(i, c) - points(j, c);
                s += diff * diff;
            }
            w(i, j) = std::sqrt(s);
        }
    }
    for (std::size_t k = 0; k < n; ++k)
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < n; ++j)
                w(i, j) = std::min(w(i, j), std::max(w(i, k), w(k, j)));

    Matrix out(static_cast<std::size_t>(seeds.num_classes), n,
               std::numeric_limits<double>::infinity());
    for (std::size_t s = 0; s < seeds.indices.size(); ++s) {
        const auto k = static_cast<std::size_t>(seeds.labels[s]);
        for (std::size_t j = 0; j < n; ++j)
            out(k, j) = std::min(out(k, j), j == seeds.indices[s] ? 0.0 : w(seeds.indices[s], j));
    }
    return out;
}

}  // namespace deepfa::opf::oracle
