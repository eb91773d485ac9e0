#include "deepfa/report.hpp"

#include "deepfa/artifacts.hpp"
#include "deepfa/config.hpp"
#include "deepfa/csv.hpp"
#include "deepfa/error.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <map>
#include <set>
#include <unordered_map>

namespace deepfa::report {

namespace {

constexpr std::array<const char*, 12> kPalette = {
    "#1F77B4", "#FF7F0E", "#2CA02C", "#D62728", "#9467BD", "#8C564B",
    "#E377C2", "#17BECF", "#BCBD22", "#AEC7E8", "#FFBB78", "#98DF8A",
};

std::string hex_color(int r, int g, int b) {
    char buf[8];
    std::snprintf(buf, sizeof buf, "#%02X%02X%02X", r, g, b);
    return buf;
}

std::string fixed(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.2f", v);
    return buf;
}

}  // namespace

ColorMode parse_color_mode(const std::string& name) {
    if (name == "label" || name == "by-label") return ColorMode::by_label;
    if (name == "confidence" || name == "by-confidence") return ColorMode::by_confidence;
    throw UsageError("unknown color mode '" + name + "' (expected by-label or by-confidence)");
}

std::string confidence_color(double confidence) {
    const double c = std::clamp(confidence, 0.0, 1.0);
    const int g = static_cast<int>(std::lround(255.0 * c));
    const int r = static_cast<int>(std::lround(255.0 * (1.0 - c)));
    return hex_color(r, g, 0);
}

std::string palette_color(int label) {
    const auto k = static_cast<std::size_t>(label < 0 ? 0 : label) % kPalette.size();
    return kPalette[k];
}

std::vector<std::string> label_fills(std::span<const int> labels, const std::vector<bool>& supervised) {
    if (labels.size() != supervised.size()) throw DimensionError("label_fills: length mismatch");
    std::vector<std::string> out;
    out.reserve(labels.size());
    for (std::size_t i = 0; i < labels.size(); ++i)
        out.push_back(supervised[i] ? palette_color(labels[i]) : std::string("#000000"));
    return out;
}

std::vector<std::string> confidence_fills(std::span<const double> confidence) {
    std::vector<std::string> out;
    out.reserve(confidence.size());
    for (double c : confidence) out.push_back(confidence_color(c));
    return out;
}

std::string render_scatter(const Matrix& points, std::span<const std::string> fills, const PlotStyle& style) {
    if (points.rows() != fills.size())
        throw DimensionError("scatter: " + std::to_string(points.rows()) + " points but " +
                             std::to_string(fills.size()) + " colours");
    if (points.cols() != 2) throw DimensionError("scatter: points must have 2 columns");
    if (style.width <= 0 || style.height <= 0 || !(style.point_radius > 0.0))
        throw SpecError("scatter: dimensions must be positive");

    double xmin = 0, xmax = 0, ymin = 0, ymax = 0;
    for (std::size_t i = 0; i < points.rows(); ++i) {
        if (i == 0) {
            xmin = xmax = points(i, 0);
            ymin = ymax = points(i, 1);
        }
        xmin = std::min(xmin, points(i, 0));
        xmax = std::max(xmax, points(i, 0));
        ymin = std::min(ymin, points(i, 1));
        ymax = std::max(ymax, points(i, 1));
    }
    const double margin = style.point_radius + 2.0;
    const double w = style.width - 2 * margin;
    const double h = style.height - 2 * margin;
    const double sx = xmax > xmin ? w / (xmax - xmin) : 0.0;
    const double sy = ymax > ymin ? h / (ymax - ymin) : 0.0;

    std::string svg = "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
    svg += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + std::to_string(style.width) +
           "\" height=\"" + std::to_string(style.height) + "\" viewBox=\"0 0 " +
           std::to_string(style.width) + " " + std::to_string(style.height) + "\">\n";
    svg += "<rect width=\"100%\" height=\"100%\" fill=\"#FFFFFF\"/>\n";
    const std::string r = fixed(style.point_radius);
    for (std::size_t i = 0; i < points.rows(); ++i) {
        const double cx = sx > 0 ? margin + (points(i, 0) - xmin) * sx : style.width / 2.0;
        const double cy = sy > 0 ? margin + (ymax - points(i, 1)) * sy : style.height / 2.0;
        svg += "<circle cx=\"" + fixed(cx) + "\" cy=\"" + fixed(cy) + "\" r=\"" + r + "\" fill=\"" +
               fills[i] + "\"/>\n";
    }
    svg += "</svg>\n";
    return svg;
}

std::string render_scatter(const PlotSpec& spec) {
    const auto emb = read_embedding_csv(spec.embedding_file);
    const auto table = csv::read(spec.labels_file);
    const auto lname = spec.labels_file.string();
    if (table.rows.size() != emb.ids.size())
        throw DimensionError("plot: embedding has " + std::to_string(emb.ids.size()) + " rows but " +
                             lname + " has " + std::to_string(table.rows.size()));
    const auto id_col = csv::column(table, "id", lname);
    std::size_t label_col = 0;
    bool found = false;
    for (const char* name : {"assigned_label", "label"}) {
        for (std::size_t c = 0; c < table.header.size() && !found; ++c)
            if (table.header[c] == name) {
                label_col = c;
                found = true;
            }
    }
    if (!found) throw ParseError(lname + ": line 1: missing column 'assigned_label' or 'label'");
    const auto sup_col = csv::column(table, "supervised", lname);

    // Non-integer labels are indexed by sorted name.
    std::set<std::string> names;
    bool numeric = true;
    for (const auto& row : table.rows) {
        names.insert(row[label_col]);
        try {
            csv::parse_int(row[label_col], lname);
        } catch (const ParseError&) {
            numeric = false;
        }
    }
    std::map<std::string, int> name_index;
    for (const auto& nm : names) name_index.emplace(nm, static_cast<int>(name_index.size()));

    std::unordered_map<std::string, std::size_t> row_of;
    for (std::size_t r = 0; r < table.rows.size(); ++r) row_of[table.rows[r][id_col]] = r;

    std::unordered_map<std::string, double> conf;
    if (spec.color_mode == ColorMode::by_confidence) {
        const auto path = spec.confidence_file ? *spec.confidence_file : spec.labels_file;
        auto t = csv::read(path);
        const auto cid = csv::column(t, "id", path.string());
        const auto cc = csv::column(t, "confidence", path.string());
        if (t.rows.size() != emb.ids.size())
            throw DimensionError("plot: embedding has " + std::to_string(emb.ids.size()) + " rows but " +
                                 path.string() + " has " + std::to_string(t.rows.size()));
        for (std::size_t r = 0; r < t.rows.size(); ++r)
            conf[t.rows[r][cid]] = csv::parse_real(t.rows[r][cc], path.string() + ": line " +
                                                                      std::to_string(t.line_numbers[r]));
    }

    std::vector<std::string> fills;
    fills.reserve(emb.ids.size());
    for (const auto& id : emb.ids) {
        const auto it = row_of.find(id);
        if (it == row_of.end()) throw DimensionError("plot: id '" + id + "' missing from " + lname);
        const auto& row = table.rows[it->second];
        if (spec.color_mode == ColorMode::by_confidence) {
            const auto c = conf.find(id);
            if (c == conf.end()) throw DimensionError("plot: no confidence for id '" + id + "'");
            fills.push_back(confidence_color(c->second));
        } else {
            const bool sup = row[sup_col] == "1";
            const int label = numeric ? static_cast<int>(csv::parse_int(row[label_col], lname))
                                      : name_index.at(row[label_col]);
            fills.push_back(sup ? palette_color(label) : std::string("#000000"));
        }
    }
    return render_scatter(emb.values, fills, spec.style);
}

std::vector<ReportRow> build_report(const std::vector<std::filesystem::path>& run_dirs) {
    std::vector<ReportRow> rows;
    for (const auto& dir : run_dirs) {
        const auto path = dir / "summary.json";
        if (!std::filesystem::exists(path)) throw IoError("report: missing summary '" + path.string() + "'");
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(csv::read_text(path));
            for (const auto& run : j.at("runs")) {
                if (run.at("final").is_null())
                    throw ParseError("report: run without completed iterations in '" + path.string() + "'");
                ReportRow row;
                row.dataset = j.at("dataset").get<std::string>();
                row.mode = run.at("mode").get<std::string>();
                row.x = run.at("x").get<double>();
                row.final = aggregate_from_json(run.at("final"));
                rows.push_back(std::move(row));
            }
        } catch (const nlohmann::json::exception& e) {
            throw ParseError("report: corrupt summary '" + path.string() + "': " + e.what());
        }
    }
    flag_best(rows);
    return rows;
}

void flag_best(std::vector<ReportRow>& rows) {
    std::map<std::pair<std::string, double>, double> best;
    for (const auto& r : rows) {
        const auto key = std::make_pair(r.dataset, r.x);
        auto it = best.find(key);
        if (it == best.end() || r.final.kappa.mean > it->second) best[key] = r.final.kappa.mean;
    }
    for (auto& r : rows) r.best = r.final.kappa.mean == best.at({r.dataset, r.x});
}

std::string report_csv(const std::vector<ReportRow>& rows) {
    std::string out =
        "dataset,mode,x,accuracy_mean,accuracy_std,kappa_mean,kappa_std,propagation_mean,propagation_std,best\n";
    for (const auto& r : rows) {
        out += r.dataset + "," + r.mode + "," + csv::format_real(r.x) + "," +
               csv::format_real(r.final.accuracy.mean) + "," + csv::format_real(r.final.accuracy.std) + "," +
               csv::format_real(r.final.kappa.mean) + "," + csv::format_real(r.final.kappa.std) + ",";
        if (r.final.propagation_accuracy)
            out += csv::format_real(r.final.propagation_accuracy->mean) + "," +
                   csv::format_real(r.final.propagation_accuracy->std);
        else
            out += ",";
        out += std::string(",") + (r.best ? "1" : "0") + "\n";
    }
    return out;
}

}  // namespace deepfa::report
