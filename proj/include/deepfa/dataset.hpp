#pragma once

#include "deepfa/matrix.hpp"

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace deepfa {

// A labeled vector dataset. Row i of `features` belongs to ids[i] / labels[i].
struct Dataset {
    std::vector<std::string> ids;
    std::vector<int> labels;  // index into class_names
    std::vector<std::string> class_names;
    Matrix features;          // n x d_raw

    std::size_t size() const noexcept { return ids.size(); }
    std::size_t dim() const noexcept { return features.cols(); }
    std::size_t num_classes() const noexcept { return class_names.size(); }

    // Throws DimensionError / ParseError when an invariant is broken.
    void validate() const;
};

enum class DatasetFormat { csv, dfa_binary };

DatasetFormat parse_dataset_format(const std::string& name);

// csv: header `id,label,f0,f1,...`.
// dfa_binary: features from `path`, ids and labels from the sidecar
// `<path without extension>.labels.csv` (columns id,label[,supervised]).
Dataset load_dataset(const std::filesystem::path& path, DatasetFormat format);
void save_dataset(const Dataset& dataset, const std::filesystem::path& path, DatasetFormat format);
std::filesystem::path labels_sidecar_path(const std::filesystem::path& features_path);

// "DFA1", u32 n, u32 d, n*d float32, all little-endian. Values are narrowed
// to float32 on write.
Matrix read_dfa(const std::filesystem::path& path);
void write_dfa(const std::filesystem::path& path, const Matrix& features);

enum class Split : std::uint8_t { S, U, T };

char split_code(Split s) noexcept;

struct SplitSpec {
    double x = 0.01;         // supervised fraction, (0, 1]
    double test_frac = 0.30; // [0, 1)
    std::uint64_t seed = 0;

    void validate() const;
};

struct SplitCounts {
    std::size_t supervised = 0;
    std::size_t unsupervised = 0;
    std::size_t test = 0;
    friend bool operator==(const SplitCounts&, const SplitCounts&) = default;
};

struct SplitAssignment {
    std::vector<Split> membership;
    SplitCounts counts;

    std::vector<std::size_t> indices_of(Split s) const;
    // Indices in S or U, in dataset order.
    std::vector<std::size_t> training_indices() const;
    friend bool operator==(const SplitAssignment&, const SplitAssignment&) = default;
};

// Target counts before class-coverage adjustment: floor(x n) and ceil(test_frac n).
SplitCounts split_targets(std::size_t n, const SplitSpec& spec);

SplitAssignment stratified_split(const Dataset& dataset, const SplitSpec& spec);

std::vector<SplitAssignment> make_partitions(const Dataset& dataset, double x, double test_frac,
                                             const std::vector<std::uint64_t>& seeds);

// CSV `id,split`.
void write_split(const std::filesystem::path& path, const Dataset& dataset,
                 const SplitAssignment& split);
SplitAssignment read_split(const std::filesystem::path& path, const Dataset& dataset);

}  // namespace deepfa
