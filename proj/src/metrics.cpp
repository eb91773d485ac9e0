#include "deepfa/metrics.hpp"

#include "deepfa/error.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <string>

namespace deepfa::metrics {

namespace {

void check_pair(std::span<const int> a, std::span<const int> b, const char* what) {
    if (a.size() != b.size())
        throw DimensionError(std::string(what) + ": length mismatch (" + std::to_string(a.size()) +
                             " vs " + std::to_string(b.size()) + ")");
    if (a.empty()) throw DimensionError(std::string(what) + ": empty input");
}

}  // namespace

double accuracy(std::span<const int> predicted, std::span<const int> truth) {
    check_pair(predicted, truth, "accuracy");
    std::size_t hits = 0;
    for (std::size_t i = 0; i < truth.size(); ++i) hits += predicted[i] == truth[i] ? 1 : 0;
    return static_cast<double>(hits) / static_cast<double>(truth.size());
}

double cohens_kappa(std::span<const int> predicted, std::span<const int> truth) {
    check_pair(predicted, truth, "cohens_kappa");
    const double n = static_cast<double>(truth.size());
    std::map<int, std::size_t> pred_count;
    std::map<int, std::size_t> true_count;
    std::size_t hits = 0;
    for (std::size_t i = 0; i < truth.size(); ++i) {
        ++pred_count[predicted[i]];
        ++true_count[truth[i]];
        hits += predicted[i] == truth[i] ? 1 : 0;
    }
    double chance = 0.0;
    for (const auto& [label, count] : pred_count) {
        const auto it = true_count.find(label);
        if (it != true_count.end()) chance += static_cast<double>(count) * static_cast<double>(it->second);
    }
    const double p_o = static_cast<double>(hits) / n;
    const double p_e = chance / (n * n);
    if (p_e >= 1.0) return hits == truth.size() ? 1.0 : 0.0;
    return (p_o - p_e) / (1.0 - p_e);
}

double propagation_accuracy(std::span<const int> assigned_u, std::span<const int> truth_u) {
    if (assigned_u.empty() && truth_u.empty())
        throw DimensionError("propagation_accuracy: empty unsupervised set");
    check_pair(assigned_u, truth_u, "propagation_accuracy");
    return accuracy(assigned_u, truth_u);
}

Summary summarize(std::span<const double> values) {
    if (values.empty()) throw DimensionError("summarize: empty input");
    double sum = 0.0;
    for (double v : values) sum += v;
    const double mean = sum / static_cast<double>(values.size());
    double ss = 0.0;
    for (double v : values) ss += (v - mean) * (v - mean);
    return {mean, std::sqrt(ss / static_cast<double>(values.size()))};
}

AggregateRecord aggregate(std::span<const MetricRecord> records) {
    if (records.empty()) throw DimensionError("aggregate: no records");
    const bool has_prop = records.front().propagation_accuracy.has_value();
    std::vector<double> acc, kap, prop;
    for (const auto& r : records) {
        if (r.propagation_accuracy.has_value() != has_prop)
            throw DimensionError("aggregate: propagation accuracy present in some records only");
        acc.push_back(r.accuracy);
        kap.push_back(r.kappa);
        if (has_prop) prop.push_back(*r.propagation_accuracy);
    }
    AggregateRecord out;
    out.accuracy = summarize(acc);
    out.kappa = summarize(kap);
    if (has_prop) out.propagation_accuracy = summarize(prop);
    out.partition_count = records.size();
    return out;
}

}  // namespace deepfa::metrics
