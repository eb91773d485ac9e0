#pragma once

#include <optional>
#include <span>
#include <vector>

namespace deepfa::metrics {

struct MetricRecord {
    double accuracy = 0.0;
    double kappa = 0.0;
    std::optional<double> propagation_accuracy;  // absent when nothing was propagated

    friend bool operator==(const MetricRecord&, const MetricRecord&) = default;
};

struct Summary {
    double mean = 0.0;
    double std = 0.0;  // population standard deviation
};

struct AggregateRecord {
    Summary accuracy;
    Summary kappa;
    std::optional<Summary> propagation_accuracy;
    std::size_t partition_count = 0;
};

double accuracy(std::span<const int> predicted, std::span<const int> truth);

// (p_o - p_e) / (1 - p_e); when p_e == 1 returns 1 if p_o == 1, else 0.
double cohens_kappa(std::span<const int> predicted, std::span<const int> truth);

double propagation_accuracy(std::span<const int> assigned_u, std::span<const int> truth_u);

Summary summarize(std::span<const double> values);

// Throws on an empty list or a mix of present and absent propagation accuracy.
AggregateRecord aggregate(std::span<const MetricRecord> records);

}  // namespace deepfa::metrics
