#pragma once

#include "deepfa/matrix.hpp"
#include "deepfa/tsne.hpp"

#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace deepfa {

// id,y0,y1
void write_embedding_csv(const std::filesystem::path& path, std::span<const std::string> ids,
                         const Matrix& y);
struct IdMatrix {
    std::vector<std::string> ids;
    Matrix values;
};
IdMatrix read_embedding_csv(const std::filesystem::path& path);

// iteration,kl
void write_loss_csv(const std::filesystem::path& path, std::span<const tsne::LossPoint> loss);

// id,assigned_label,cost,confidence,supervised
void write_propagation_csv(const std::filesystem::path& path, std::span<const std::string> ids,
                           std::span<const int> assigned, std::span<const double> cost,
                           std::span<const double> confidence, const std::vector<bool>& supervised);

// id,confidence
void write_confidence_csv(const std::filesystem::path& path, std::span<const std::string> ids,
                          std::span<const double> confidence);

}  // namespace deepfa
