#include "deepfa/artifacts.hpp"

#include "deepfa/csv.hpp"
#include "deepfa/error.hpp"

namespace deepfa {

void write_embedding_csv(const std::filesystem::path& path, std::span<const std::string> ids,
                         const Matrix& y) {
    if (ids.size() != y.rows() || y.cols() != 2)
        throw DimensionError("embedding export: expected one id per row and 2 columns");
    std::string out = "id,y0,y1\n";
    for (std::size_t i = 0; i < ids.size(); ++i)
        out += ids[i] + "," + csv::format_real(y(i, 0)) + "," + csv::format_real(y(i, 1)) + "\n";
    csv::write_text(path, out);
}

IdMatrix read_embedding_csv(const std::filesystem::path& path) {
    const auto table = csv::read(path);
    const auto name = path.string();
    const auto id_col = csv::column(table, "id", name);
    const auto c0 = csv::column(table, "y0", name);
    const auto c1 = csv::column(table, "y1", name);
    IdMatrix out;
    out.values = Matrix(table.rows.size(), 2);
    for (std::size_t r = 0; r < table.rows.size(); ++r) {
        const auto where = name + ": line " + std::to_string(table.line_numbers[r]);
        out.ids.push_back(table.rows[r][id_col]);
        out.values(r, 0) = csv::parse_real(table.rows[r][c0], where);
        out.values(r, 1) = csv::parse_real(table.rows[r][c1], where);
    }
    return out;
}

void write_loss_csv(const std::filesystem::path& path, std::span<const tsne::LossPoint> loss) {
    std::string out = "iteration,kl\n";
    for (const auto& p : loss) out += std::to_string(p.iteration) + "," + csv::format_real(p.kl) + "\n";
    csv::write_text(path, out);
}

void write_propagation_csv(const std::filesystem::path& path, std::span<const std::string> ids,
                           std::span<const int> assigned, std::span<const double> cost,
                           std::span<const double> confidence, const std::vector<bool>& supervised) {
    const auto n = ids.size();
    if (assigned.size() != n || cost.size() != n || confidence.size() != n || supervised.size() != n)
        throw DimensionError("propagation export: column lengths disagree");
    std::string out = "id,assigned_label,cost,confidence,supervised\n";
    for (std::size_t i = 0; i < n; ++i) {
        out += ids[i] + "," + std::to_string(assigned[i]) + "," + csv::format_real(cost[i]) + "," +
               csv::format_real(confidence[i]) + "," + (supervised[i] ? "1" : "0") + "\n";
    }
    csv::write_text(path, out);
}

void write_confidence_csv(const std::filesystem::path& path, std::span<const std::string> ids,
                          std::span<const double> confidence) {
    if (ids.size() != confidence.size()) throw DimensionError("confidence export: length mismatch");
    std::string out = "id,confidence\n";
    for (std::size_t i = 0; i < ids.size(); ++i) out += ids[i] + "," + csv::format_real(confidence[i]) + "\n";
    csv::write_text(path, out);
}

}  // namespace deepfa
