#pragma once

#include "deepfa/matrix.hpp"
#include "deepfa/metrics.hpp"

#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace deepfa::report {

enum class ColorMode { by_label, by_confidence };

ColorMode parse_color_mode(const std::string& name);

struct PlotStyle {
    int width = 800;
    int height = 800;
    double point_radius = 3.0;
};

struct PlotSpec {
    std::filesystem::path embedding_file;   // id,y0,y1
    std::filesystem::path labels_file;      // id,assigned_label|label,...,supervised
    std::optional<std::filesystem::path> confidence_file;  // id,confidence
    ColorMode color_mode = ColorMode::by_label;
    PlotStyle style;
};

// Linear red (0) to green (1) blend, "#RRGGBB".
std::string confidence_color(double confidence);
std::string palette_color(int label);

// Supervised samples take their class colour, unsupervised ones black.
std::vector<std::string> label_fills(std::span<const int> labels, const std::vector<bool>& supervised);
std::vector<std::string> confidence_fills(std::span<const double> confidence);

// One <circle> per row of `points` (n x 2), in row order.
std::string render_scatter(const Matrix& points, std::span<const std::string> fills, const PlotStyle& style);
std::string render_scatter(const PlotSpec& spec);

struct ReportRow {
    std::string dataset;
    std::string mode;
    double x = 0.0;
    metrics::AggregateRecord final;
    bool best = false;
};

// Reads <dir>/summary.json for each run directory, in order.
std::vector<ReportRow> build_report(const std::vector<std::filesystem::path>& run_dirs);

// Marks, per (dataset, x), every row whose kappa mean equals the maximum.
void flag_best(std::vector<ReportRow>& rows);

std::string report_csv(const std::vector<ReportRow>& rows);

}  // namespace deepfa::report
