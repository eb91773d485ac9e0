#include "deepfa/dataset.hpp"

#include "deepfa/csv.hpp"
#include "deepfa/error.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <map>
#include <numeric>
#include <random>
#include <set>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

namespace deepfa {

namespace {

constexpr char kMagic[4] = {'D', 'F', 'A', '1'};

static_assert(std::endian::native == std::endian::little,
              "dfa-binary I/O assumes a little-endian host");

bool is_integer_text(const std::string& s) {
    if (s.empty()) return false;
    std::size_t i = (s[0] == '-') ? 1 : 0;
    if (i == s.size()) return false;
    for (; i < s.size(); ++i)
        if (s[i] < '0' || s[i] > '9') return false;
    return true;
}

// Numeric labels sort numerically, anything else lexicographically.
std::vector<std::string> ordered_class_names(const std::vector<std::string>& raw_labels) {
    std::set<std::string> unique(raw_labels.begin(), raw_labels.end());
    std::vector<std::string> names(unique.begin(), unique.end());
    const bool numeric = std::all_of(names.begin(), names.end(), is_integer_text);
    if (numeric) {
        std::sort(names.begin(), names.end(), [](const std::string& a, const std::string& b) {
            return std::stoll(a) < std::stoll(b);
        });
    }
    return names;
}

void assign_labels(Dataset& ds, const std::vector<std::string>& raw_labels) {
    ds.class_names = ordered_class_names(raw_labels);
    std::unordered_map<std::string, int> index;
    for (std::size_t k = 0; k < ds.class_names.size(); ++k)
        index[ds.class_names[k]] = static_cast<int>(k);
    ds.labels.clear();
    ds.labels.reserve(raw_labels.size());
    for (const auto& l : raw_labels) ds.labels.push_back(index.at(l));
}

Dataset load_csv(const std::filesystem::path& path) {
    const auto name = path.string();
    const auto text = csv::read_text(path);
    std::size_t line_no = 0;
    std::size_t pos = 0;
    std::size_t d = 0;
    bool have_header = false;
    Dataset ds;
    std::vector<std::string> raw_labels;
    std::vector<double> values;
    while (pos < text.size()) {
        auto end = text.find('\n', pos);
        if (end == std::string::npos) end = text.size();
        std::string_view line(text.data() + pos, end - pos);
        pos = end + 1;
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
        if (line.empty()) continue;
        auto fields = csv::split_line(line);
        auto where = name + ": line " + std::to_string(line_no);
        if (have_header) where += " (row " + std::to_string(ds.ids.size() + 1) + ")";
        if (!have_header) {
            if (fields.size() < 2 || fields[0] != "id" || fields[1] != "label")
                throw ParseError(where + ": header must start with 'id,label'");
            d = fields.size() - 2;
            have_header = true;
            continue;
        }
        if (fields.size() < 2) throw ParseError(where + ": expected at least id and label");
        if (fields.size() - 2 != d)
            throw DimensionError(where + ": row has " + std::to_string(fields.size() - 2) +
                                 " features, expected " + std::to_string(d));
        for (std::size_t j = 2; j < fields.size(); ++j) {
            const double v = csv::parse_real(fields[j], where);
            if (!std::isfinite(v)) throw ParseError(where + ": non-finite feature value");
            values.push_back(v);
        }
        ds.ids.push_back(fields[0]);
        raw_labels.push_back(fields[1]);
    }
    if (!have_header) throw ParseError(name + ": line 1: empty file, expected a header");
    if (ds.ids.empty()) throw ParseError(name + ": no data rows");
    ds.features = Matrix(ds.ids.size(), d, std::move(values));
    assign_labels(ds, raw_labels);
    ds.validate();
    return ds;
}

Dataset load_dfa_dataset(const std::filesystem::path& path) {
    Dataset ds;
    ds.features = read_dfa(path);
    const auto sidecar = labels_sidecar_path(path);
    if (!std::filesystem::exists(sidecar))
        throw ParseError(path.string() + ": missing labels sidecar '" + sidecar.string() + "'");
    const auto table = csv::read(sidecar);
    const auto id_col = csv::column(table, "id", sidecar.string());
    const auto label_col = csv::column(table, "label", sidecar.string());
    if (table.rows.size() != ds.features.rows())
        throw DimensionError(sidecar.string() + ": " + std::to_string(table.rows.size()) +
                             " label rows for " + std::to_string(ds.features.rows()) +
                             " feature rows");
    std::vector<std::string> raw_labels;
    for (const auto& row : table.rows) {
        ds.ids.push_back(row[id_col]);
        raw_labels.push_back(row[label_col]);
    }
    if (ds.ids.empty()) throw ParseError(path.string() + ": no samples");
    assign_labels(ds, raw_labels);
    ds.validate();
    return ds;
}

}  // namespace

void Dataset::validate() const {
    const auto n = ids.size();
    if (labels.size() != n || features.rows() != n)
        throw DimensionError("dataset: ids, labels and feature rows disagree in count");
    std::unordered_set<std::string> seen;
    for (std::size_t i = 0; i < n; ++i) {
        if (!seen.insert(ids[i]).second)
            throw ParseError("dataset: duplicate sample id '" + ids[i] + "'");
        if (labels[i] < 0 || static_cast<std::size_t>(labels[i]) >= class_names.size())
            throw DimensionError("dataset: label of sample '" + ids[i] + "' out of range");
        for (double v : features.row(i))
            if (!std::isfinite(v))
                throw ParseError("dataset: sample '" + ids[i] + "' has a non-finite feature");
    }
}

DatasetFormat parse_dataset_format(const std::string& name) {
    if (name == "csv") return DatasetFormat::csv;
    if (name == "dfa-binary" || name == "dfa") return DatasetFormat::dfa_binary;
    throw UsageError("unknown dataset format '" + name + "' (expected csv or dfa-binary)");
}

std::filesystem::path labels_sidecar_path(const std::filesystem::path& features_path) {
    auto p = features_path;
    p.replace_extension(".labels.csv");
    return p;
}

Dataset load_dataset(const std::filesystem::path& path, DatasetFormat format) {
    if (!std::filesystem::exists(path)) throw IoError("no such file '" + path.string() + "'");
    return format == DatasetFormat::csv ? load_csv(path) : load_dfa_dataset(path);
}

void save_dataset(const Dataset& ds, const std::filesystem::path& path, DatasetFormat format) {
    ds.validate();
    if (format == DatasetFormat::csv) {
        std::string out = "id,label";
        for (std::size_t j = 0; j < ds.dim(); ++j) out += ",f" + std::to_string(j);
        out += '\n';
        for (std::size_t i = 0; i < ds.size(); ++i) {
            out += ds.ids[i];
            out += ',';
            out += ds.class_names[static_cast<std::size_t>(ds.labels[i])];
            for (double v : ds.features.row(i)) {
                out += ',';
                out += csv::format_real(v);
            }
            out += '\n';
        }
        csv::write_text(path, out);
        return;
    }
    write_dfa(path, ds.features);
    std::string side = "id,label,supervised\n";
    for (std::size_t i = 0; i < ds.size(); ++i)
        side += ds.ids[i] + "," + ds.class_names[static_cast<std::size_t>(ds.labels[i])] + ",0\n";
    csv::write_text(labels_sidecar_path(path), side);
}

Matrix read_dfa(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open '" + path.string() + "'");
    char magic[4];
    std::uint32_t header[2];
    if (!in.read(magic, 4) || std::memcmp(magic, kMagic, 4) != 0)
        throw ParseError(path.string() + ": offset 0: bad magic, expected 'DFA1'");
    if (!in.read(reinterpret_cast<char*>(header), sizeof header))
        throw ParseError(path.string() + ": offset 4: truncated header");
    const std::size_t n = header[0];
    const std::size_t d = header[1];
    std::vector<float> raw(n * d);
    if (!raw.empty() &&
        !in.read(reinterpret_cast<char*>(raw.data()),
                 static_cast<std::streamsize>(raw.size() * sizeof(float)))) {
        throw ParseError(path.string() + ": offset " + std::to_string(12 + in.gcount()) +
                         ": truncated payload, expected " + std::to_string(n * d) + " floats");
    }
    in.peek();
    if (!in.eof())
        throw ParseError(path.string() + ": offset " + std::to_string(12 + n * d * 4) +
                         ": trailing bytes after payload");
    std::vector<double> values(raw.begin(), raw.end());
    for (std::size_t k = 0; k < values.size(); ++k)
        if (!std::isfinite(values[k]))
            throw ParseError(path.string() + ": offset " + std::to_string(12 + 4 * k) +
                             ": non-finite value");
    return Matrix(n, d, std::move(values));
}

void write_dfa(const std::filesystem::path& path, const Matrix& features) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
    const std::uint32_t header[2] = {static_cast<std::uint32_t>(features.rows()),
                                     static_cast<std::uint32_t>(features.cols())};
    std::vector<float> raw(features.values().begin(), features.values().end());
    out.write(kMagic, 4);
    out.write(reinterpret_cast<const char*>(header), sizeof header);
    out.write(reinterpret_cast<const char*>(raw.data()),
              static_cast<std::streamsize>(raw.size() * sizeof(float)));
    if (!out) throw IoError("failed writing '" + path.string() + "'");
}

char split_code(Split s) noexcept {
    switch (s) {
    case Split::S: return 'S';
    case Split::U: return 'U';
    case Split::T: return 'T';
    }
    return '?';
}

void SplitSpec::validate() const {
    if (!(x > 0.0 && x <= 1.0))
        throw SpecError("supervised fraction x must lie in (0, 1], got " + csv::format_real(x));
    if (!(test_frac >= 0.0 && test_frac < 1.0))
        throw SpecError("test fraction must lie in [0, 1), got " + csv::format_real(test_frac));
    if (!(x + test_frac < 1.0))
        throw SpecError("x + test fraction must be < 1, got " + csv::format_real(x + test_frac));
}

SplitCounts split_targets(std::size_t n, const SplitSpec& spec) {
    spec.validate();
    // The epsilon absorbs representation error in products such as 0.3 * 5000.
    constexpr double eps = 1e-9;
    const double dn = static_cast<double>(n);
    SplitCounts c;
    c.supervised = static_cast<std::size_t>(std::floor(spec.x * dn + eps));
    c.test = static_cast<std::size_t>(std::max(0.0, std::ceil(spec.test_frac * dn - eps)));
    c.unsupervised = n >= c.supervised + c.test ? n - c.supervised - c.test : 0;
    return c;
}

namespace {

// Largest-remainder apportionment of `total` over `weights`; ties go to the lower index.
std::vector<std::size_t> apportion(std::size_t total, const std::vector<std::size_t>& weights) {
    const std::size_t sum = std::accumulate(weights.begin(), weights.end(), std::size_t{0});
    std::vector<std::size_t> quota(weights.size());
    std::vector<std::pair<std::size_t, std::size_t>> remainders;  // (remainder numerator, k)
    std::size_t assigned = 0;
    for (std::size_t k = 0; k < weights.size(); ++k) {
        const auto num = total * weights[k];
        quota[k] = num / sum;
        remainders.emplace_back(num % sum, k);
        assigned += quota[k];
    }
    std::stable_sort(remainders.begin(), remainders.end(),
                     [](const auto& a, const auto& b) { return a.first > b.first; });
    for (std::size_t r = 0; assigned < total; ++r, ++assigned) ++quota[remainders[r].second];
    return quota;
}

}  // namespace

SplitAssignment stratified_split(const Dataset& dataset, const SplitSpec& spec) {
    const std::size_t n = dataset.size();
    const std::size_t K = dataset.num_classes();
    const auto targets = split_targets(n, spec);

    std::vector<std::vector<std::size_t>> members(K);
    for (std::size_t i = 0; i < n; ++i) members[static_cast<std::size_t>(dataset.labels[i])].push_back(i);
    std::vector<std::size_t> class_sizes(K);
    for (std::size_t k = 0; k < K; ++k) {
        if (members[k].empty())
            throw StratificationError("class '" + dataset.class_names[k] + "' has no samples");
        class_sizes[k] = members[k].size();
    }

    auto s_quota = apportion(targets.supervised, class_sizes);
    for (auto& q : s_quota) q = std::max<std::size_t>(q, 1);
    auto t_quota = apportion(targets.test, class_sizes);

    const std::size_t s_total = std::accumulate(s_quota.begin(), s_quota.end(), std::size_t{0});
    if (s_total + targets.test > n)
        throw SpecError("split leaves a negative unsupervised set: |S|=" + std::to_string(s_total) +
                        " |T|=" + std::to_string(targets.test) + " n=" + std::to_string(n));

    // A class whose S and T quotas exceed its size hands T slots to the class
    // with the most spare U capacity.
    for (std::size_t k = 0; k < K; ++k) {
        while (s_quota[k] + t_quota[k] > class_sizes[k]) {
            if (t_quota[k] == 0)
                throw SpecError("class '" + dataset.class_names[k] +
                                "' is too small for its supervised quota");
            std::size_t best = K;
            std::size_t best_spare = 0;
            for (std::size_t j = 0; j < K; ++j) {
                const auto used = s_quota[j] + t_quota[j];
                const auto spare = class_sizes[j] > used ? class_sizes[j] - used : 0;
                if (spare > best_spare) {
                    best_spare = spare;
                    best = j;
                }
            }
            if (best == K) throw SpecError("split leaves a negative unsupervised set");
            --t_quota[k];
            ++t_quota[best];
        }
    }

    std::mt19937_64 rng(spec.seed);
    SplitAssignment out;
    out.membership.assign(n, Split::U);
    for (std::size_t k = 0; k < K; ++k) {
        auto shuffled = members[k];
        std::shuffle(shuffled.begin(), shuffled.end(), rng);
        for (std::size_t r = 0; r < shuffled.size(); ++r) {
            if (r < s_quota[k])
                out.membership[shuffled[r]] = Split::S;
            else if (r < s_quota[k] + t_quota[k])
                out.membership[shuffled[r]] = Split::T;
        }
    }
    for (auto m : out.membership) {
        if (m == Split::S) ++out.counts.supervised;
        else if (m == Split::U) ++out.counts.unsupervised;
        else ++out.counts.test;
    }
    return out;
}

std::vector<SplitAssignment> make_partitions(const Dataset& dataset, double x, double test_frac,
                                             const std::vector<std::uint64_t>& seeds) {
    std::set<std::uint64_t> unique(seeds.begin(), seeds.end());
    if (unique.size() != seeds.size()) throw SpecError("partition seeds must be distinct");
    std::vector<SplitAssignment> out;
    out.reserve(seeds.size());
    for (auto seed : seeds) out.push_back(stratified_split(dataset, SplitSpec{x, test_frac, seed}));
    return out;
}

std::vector<std::size_t> SplitAssignment::indices_of(Split s) const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < membership.size(); ++i)
        if (membership[i] == s) out.push_back(i);
    return out;
}

std::vector<std::size_t> SplitAssignment::training_indices() const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < membership.size(); ++i)
        if (membership[i] != Split::T) out.push_back(i);
    return out;
}

void write_split(const std::filesystem::path& path, const Dataset& dataset,
                 const SplitAssignment& split) {
    if (split.membership.size() != dataset.size())
        throw DimensionError("split size does not match dataset size");
    std::string out = "id,split\n";
    for (std::size_t i = 0; i < dataset.size(); ++i) {
        out += dataset.ids[i];
        out += ',';
        out += split_code(split.membership[i]);
        out += '\n';
    }
    csv::write_text(path, out);
}

SplitAssignment read_split(const std::filesystem::path& path, const Dataset& dataset) {
    const auto table = csv::read(path);
    const auto name = path.string();
    const auto id_col = csv::column(table, "id", name);
    const auto split_col = csv::column(table, "split", name);
    std::unordered_map<std::string, std::size_t> index;
    for (std::size_t i = 0; i < dataset.size(); ++i) index[dataset.ids[i]] = i;
    SplitAssignment out;
    out.membership.assign(dataset.size(), Split::U);
    std::vector<bool> seen(dataset.size(), false);
    for (std::size_t r = 0; r < table.rows.size(); ++r) {
        const auto where = name + ": line " + std::to_string(table.line_numbers[r]);
        const auto it = index.find(table.rows[r][id_col]);
        if (it == index.end()) throw ParseError(where + ": unknown id '" + table.rows[r][id_col] + "'");
        const auto& code = table.rows[r][split_col];
        Split s;
        if (code == "S") s = Split::S;
        else if (code == "U") s = Split::U;
        else if (code == "T") s = Split::T;
        else throw ParseError(where + ": split must be S, U or T");
        out.membership[it->second] = s;
        seen[it->second] = true;
    }
    for (std::size_t i = 0; i < seen.size(); ++i)
        if (!seen[i]) throw ParseError(name + ": id '" + dataset.ids[i] + "' missing");
    for (auto m : out.membership) {
        if (m == Split::S) ++out.counts.supervised;
        else if (m == Split::U) ++out.counts.unsupervised;
        else ++out.counts.test;
    }
    return out;
}

}  // namespace deepfa
