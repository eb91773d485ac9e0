#include "deepfa/opf_semi.hpp"

#include "deepfa/error.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>

namespace deepfa::opf {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double arc_weight(const Matrix& points, std::size_t a, std::size_t b) {
    auto pa = points.row(a);
    auto pb = points.row(b);
    double s = 0.0;
    for (std::size_t c = 0; c < pa.size(); ++c) {
        const double diff = pa[c] - pb[c];
        s += diff * diff;
    }
    return std::sqrt(s);
}

// IFT with f_max on the implicit complete graph. The queue is an array scan:
// the next node is the open one with the smallest (cost, insertion stamp).
struct ForestState {
    std::vector<double> cost;
    std::vector<std::size_t> pred;
    std::vector<std::size_t> root;
};

ForestState run_forest(const Matrix& points, std::span<const std::size_t> roots) {
    const std::size_t n = points.rows();
    ForestState st;
    st.cost.assign(n, kInf);
    st.pred.assign(n, kNoPredecessor);
    st.root.assign(n, kNoPredecessor);
    std::vector<std::uint64_t> stamp(n, std::numeric_limits<std::uint64_t>::max());
    std::vector<char> done(n, 0);
    std::uint64_t next_stamp = 0;
    for (auto s : roots) {
        st.cost[s] = 0.0;
        st.root[s] = s;
        stamp[s] = next_stamp++;
    }
    for (std::size_t step = 0; step < n; ++step) {
        std::size_t best = kNoPredecessor;
        for (std::size_t i = 0; i < n; ++i) {
            if (done[i] || stamp[i] == std::numeric_limits<std::uint64_t>::max()) continue;
            if (best == kNoPredecessor || st.cost[i] < st.cost[best] ||
                (st.cost[i] == st.cost[best] && stamp[i] < stamp[best]))
                best = i;
        }
        if (best == kNoPredecessor) break;
        done[best] = 1;
        for (std::size_t j = 0; j < n; ++j) {
            if (done[j]) continue;
            const double offer = std::max(st.cost[best], arc_weight(points, best, j));
            if (offer < st.cost[j]) {
                st.cost[j] = offer;
                st.pred[j] = best;
                st.root[j] = st.root[best];
                stamp[j] = next_stamp++;
            }
        }
    }
    return st;
}

void check_points(const Matrix& points) {
    for (double v : points.values())
        if (!std::isfinite(v)) throw DimensionError("opf: points contain non-finite values");
}

}  // namespace

void SeedSet::validate(std::size_t n) const {
    if (indices.empty()) throw SeedError("opf: empty seed set");
    if (labels.size() != indices.size()) throw SeedError("opf: seed indices and labels disagree");
    if (num_classes < 1) throw SeedError("opf: number of classes must be >= 1");
    std::vector<char> used(n, 0);
    std::vector<char> covered(static_cast<std::size_t>(num_classes), 0);
    for (std::size_t s = 0; s < indices.size(); ++s) {
        if (indices[s] >= n) throw SeedError("opf: seed index out of range");
        if (used[indices[s]]) throw SeedError("opf: duplicate seed index " + std::to_string(indices[s]));
        used[indices[s]] = 1;
        if (labels[s] < 0 || labels[s] >= num_classes) throw SeedError("opf: seed label out of range");
        covered[static_cast<std::size_t>(labels[s])] = 1;
    }
    for (int k = 0; k < num_classes; ++k)
        if (!covered[static_cast<std::size_t>(k)])
            throw SeedError("opf: class " + std::to_string(k) + " has no seed");
}

Matrix per_class_costs(const Matrix& points, const SeedSet& seeds) {
    const std::size_t n = points.rows();
    seeds.validate(n);
    check_points(points);
    Matrix out(static_cast<std::size_t>(seeds.num_classes), n);
    for (int k = 0; k < seeds.num_classes; ++k) {
        std::vector<std::size_t> roots;
        for (std::size_t s = 0; s < seeds.indices.size(); ++s)
            if (seeds.labels[s] == k) roots.push_back(seeds.indices[s]);
        const auto st = run_forest(points, roots);
        auto row = out.row(static_cast<std::size_t>(k));
        std::copy(st.cost.begin(), st.cost.end(), row.begin());
    }
    return out;
}

PathForest propagate_labels(const Matrix& points, const SeedSet& seeds) {
    const std::size_t n = points.rows();
    seeds.validate(n);
    check_points(points);
    auto st = run_forest(points, seeds.indices);

    std::vector<int> seed_label(n, -1);
    for (std::size_t s = 0; s < seeds.indices.size(); ++s) seed_label[seeds.indices[s]] = seeds.labels[s];

    PathForest f;
    f.predecessor = std::move(st.pred);
    f.cost = std::move(st.cost);
    f.root = std::move(st.root);
    f.assigned_label.resize(n);
    for (std::size_t i = 0; i < n; ++i) f.assigned_label[i] = seed_label[f.root[i]];
    f.class_costs = per_class_costs(points, seeds);
    return f;
}

std::vector<double> confidence(const Matrix& class_costs, std::span<const int> assigned_label,
                               const std::vector<bool>& supervised) {
    const std::size_t K = class_costs.rows();
    const std::size_t n = class_costs.cols();
    if (K < 1) throw DimensionError("confidence: need at least one class");
    if (assigned_label.size() != n || supervised.size() != n)
        throw DimensionError("confidence: shapes disagree");
    std::vector<double> out(n, 1.0);
    for (std::size_t i = 0; i < n; ++i) {
        if (supervised[i] || K == 1) continue;
        const auto own = static_cast<std::size_t>(assigned_label[i]);
        const double c1 = class_costs(own, i);
        double c2 = kInf;
        for (std::size_t k = 0; k < K; ++k)
            if (k != own) c2 = std::min(c2, class_costs(k, i));
        double raw;
        if (c1 + c2 == 0.0)
            raw = 0.5;
        else
            raw = c2 / (c1 + c2);
        out[i] = std::clamp(2.0 * raw - 1.0, 0.0, 1.0);
    }
    return out;
}

}  // namespace deepfa::opf
