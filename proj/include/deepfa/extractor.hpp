#pragma once

#include "deepfa/matrix.hpp"

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <variant>
#include <vector>

namespace deepfa::extractor {

enum class ExtractorKind { builtin_mlp, external };

struct ExtractorSpec {
    ExtractorKind kind = ExtractorKind::builtin_mlp;
    int hidden_width = 128;
    int epochs = 100;
    double lr_initial = 1e-3;
    double momentum = 0.9;
    int batch_size = 32;
    std::uint64_t seed = 0;
    std::string external_command;  // external kind only
    bool warm_start = false;
    std::filesystem::path work_dir;  // scratch space for the external protocol

    void validate() const;
};

// lr_initial * (1 - epoch / epochs)
double learning_rate_at(const ExtractorSpec& spec, int epoch);

// One hidden rectifier layer followed by a softmax head. Inputs are centred
// per column and divided by one pooled scale from the training set.
struct MlpModel {
    std::vector<double> input_mean;
    std::vector<double> input_scale;
    Matrix w1;  // d x hidden
    std::vector<double> b1;
    Matrix w2;  // hidden x classes
    std::vector<double> b2;

    std::size_t input_dim() const noexcept { return w1.rows(); }
    std::size_t hidden_width() const noexcept { return w1.cols(); }
    std::size_t num_classes() const noexcept { return w2.cols(); }
};

struct ExternalModel {
    std::string command;
    std::filesystem::path model_dir;
    std::filesystem::path work_dir;
    int num_classes = 0;
    std::size_t input_dim = 0;
};

using ExtractorModel = std::variant<MlpModel, ExternalModel>;

struct PredictionResult {
    Matrix probabilities;  // n x K, rows sum to 1
    std::vector<int> predicted_label;
};

MlpModel init_mlp(std::size_t input_dim, std::size_t hidden_width, std::size_t num_classes,
                  std::uint64_t seed);

// `previous` seeds the weights when spec.warm_start is set (builtin only).
ExtractorModel train_extractor(const Matrix& raw, std::span<const int> labels, int num_classes,
                               const ExtractorSpec& spec, const ExtractorModel* previous = nullptr);

Matrix extract_features(const ExtractorModel& model, const Matrix& raw);

PredictionResult predict(const ExtractorModel& model, const Matrix& raw);

// Row-wise argmax, ties to the lowest index.
std::vector<int> argmax_rows(const Matrix& probabilities);

struct MlpGradient {
    double loss = 0.0;  // mean cross-entropy
    Matrix w1;
    std::vector<double> b1;
    Matrix w2;
    std::vector<double> b2;
};

// Mean cross-entropy of `model` on (raw, labels) and its analytic gradient.
MlpGradient mlp_loss_gradient(const MlpModel& model, const Matrix& raw, std::span<const int> labels);

}  // namespace deepfa::extractor
