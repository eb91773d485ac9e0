#pragma once

#include "deepfa/dataset.hpp"
#include "deepfa/extractor.hpp"
#include "deepfa/metrics.hpp"
#include "deepfa/tsne.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace deepfa {

enum class Mode { baseline, deepfa, deepfa_loop };

std::string to_string(Mode mode);
Mode parse_mode(const std::string& name);

struct ExperimentConfig {
    Mode mode = Mode::deepfa_loop;
    int iterations = 5;  // used by deepfa-loop; deepfa runs 1, baseline 0
    SplitSpec split;
    tsne::TsneParams tsne;
    extractor::ExtractorSpec extractor;
    std::uint64_t base_seed = 0;
    int partitions = 3;
    int threads = 1;
    bool write_plots = true;

    int effective_iterations() const;
    void validate() const;
};

struct IterationRecord {
    int iteration = 0;
    metrics::MetricRecord metrics;

    // Propagation artifacts over S u U (dataset order); empty for iteration 0.
    std::vector<std::size_t> sample_indices;
    Matrix embedding;
    std::vector<tsne::LossPoint> loss;
    std::vector<int> assigned_label;
    std::vector<double> cost;
    std::vector<double> confidence;
    std::vector<bool> supervised;
};

struct PartitionResult {
    std::uint64_t split_seed = 0;
    SplitAssignment split;
    std::vector<IterationRecord> iterations;
    std::optional<std::string> error;  // set when the partition aborted
};

struct RunResult {
    ExperimentConfig config;
    std::vector<PartitionResult> partitions;
    std::vector<metrics::AggregateRecord> aggregates;  // indexed by iteration

    const metrics::AggregateRecord& final_aggregate() const;
    std::optional<std::string> first_error() const;
};

// Throws if any index belongs to T.
void audit_training_indices(const SplitAssignment& split, std::span<const std::size_t> indices);

// Seeds used for the partitions of `cfg`: split.seed + p.
std::vector<std::uint64_t> partition_seeds(const ExperimentConfig& cfg);

// One partition of any mode, starting from an existing split.
PartitionResult run_partition(const Dataset& dataset, const ExperimentConfig& cfg,
                              const SplitAssignment& split, std::size_t partition_index);

RunResult run_baseline(const Dataset& dataset, const ExperimentConfig& cfg);
RunResult run_deepfa(const Dataset& dataset, const ExperimentConfig& cfg);
RunResult run_experiment(const Dataset& dataset, const ExperimentConfig& cfg);

// modes x x_values, modes outermost.
std::vector<RunResult> run_grid(const Dataset& dataset, const std::vector<double>& x_values,
                                const std::vector<Mode>& modes, const ExperimentConfig& base);

// <out>/<mode>/<x>/<partition>/iter<t>/{embedding.csv, labels.csv, confidence.csv, metrics.json, ...}
void write_run(const std::filesystem::path& out, const Dataset& dataset, const RunResult& run);
void write_summary(const std::filesystem::path& path, const std::string& dataset_name,
                   const Dataset& dataset, const std::vector<RunResult>& runs);

std::string format_fraction(double x);

}  // namespace deepfa
