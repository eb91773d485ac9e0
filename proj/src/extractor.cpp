#include "deepfa/extractor.hpp"

#include "deepfa/csv.hpp"
#include "deepfa/dataset.hpp"
#include "deepfa/error.hpp"
#include "deepfa/subprocess.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

namespace deepfa::extractor {

void ExtractorSpec::validate() const {
    if (epochs < 1) throw SpecError("extractor epochs must be >= 1");
    if (!(lr_initial > 0.0) || !std::isfinite(lr_initial))
        throw SpecError("extractor lr_initial must be > 0");
    if (!(momentum >= 0.0 && momentum < 1.0)) throw SpecError("extractor momentum must lie in [0, 1)");
    if (batch_size < 1) throw SpecError("extractor batch_size must be >= 1");
    if (kind == ExtractorKind::builtin_mlp && hidden_width < 1)
        throw SpecError("extractor hidden_width must be >= 1");
    if (kind == ExtractorKind::external && external_command.empty())
        throw SpecError("external extractor needs a command");
}

double learning_rate_at(const ExtractorSpec& spec, int epoch) {
    return spec.lr_initial * (1.0 - static_cast<double>(epoch) / static_cast<double>(spec.epochs));
}

std::vector<int> argmax_rows(const Matrix& probabilities) {
    std::vector<int> out(probabilities.rows(), 0);
    for (std::size_t i = 0; i < probabilities.rows(); ++i) {
        auto row = probabilities.row(i);
        std::size_t best = 0;
        for (std::size_t k = 1; k < row.size(); ++k)
            if (row[k] > row[best]) best = k;
        out[i] = static_cast<int>(best);
    }
    return out;
}

// ---------------------------------------------------------------------------
// Builtin network
// ---------------------------------------------------------------------------

namespace {

struct Workspace {
    std::vector<double> x;       // standardized input
    std::vector<double> hidden;  // post-rectifier
    std::vector<double> logits;
    std::vector<double> prob;
    std::vector<double> d_hidden;
};

void check_input(const MlpModel& m, const Matrix& raw) {
    if (raw.cols() != m.input_dim())
        throw DimensionError("extractor: input has " + std::to_string(raw.cols()) +
                             " columns, model expects " + std::to_string(m.input_dim()));
}

void forward(const MlpModel& m, std::span<const double> raw_row, Workspace& ws) {
    const std::size_t d = m.input_dim();
    const std::size_t h = m.hidden_width();
    const std::size_t K = m.num_classes();
    ws.x.resize(d);
    for (std::size_t k = 0; k < d; ++k) ws.x[k] = (raw_row[k] - m.input_mean[k]) / m.input_scale[k];

    ws.hidden.assign(m.b1.begin(), m.b1.end());
    for (std::size_t k = 0; k < d; ++k) {
        const double xk = ws.x[k];
        if (xk == 0.0) continue;
        auto w = m.w1.row(k);
        for (std::size_t j = 0; j < h; ++j) ws.hidden[j] += xk * w[j];
    }
    for (auto& v : ws.hidden) v = std::max(v, 0.0);

    ws.logits.assign(m.b2.begin(), m.b2.end());
    for (std::size_t j = 0; j < h; ++j) {
        const double hj = ws.hidden[j];
        if (hj == 0.0) continue;
        auto w = m.w2.row(j);
        for (std::size_t c = 0; c < K; ++c) ws.logits[c] += hj * w[c];
    }
    const double top = *std::max_element(ws.logits.begin(), ws.logits.end());
    ws.prob.resize(K);
    double z = 0.0;
    for (std::size_t c = 0; c < K; ++c) {
        ws.prob[c] = std::exp(ws.logits[c] - top);
        z += ws.prob[c];
    }
    for (auto& p : ws.prob) p /= z;
}

// Accumulates the gradient of -log p(label) into g; returns the loss.
double backward(const MlpModel& m, int label, Workspace& ws, MlpGradient& g) {
    const std::size_t d = m.input_dim();
    const std::size_t h = m.hidden_width();
    const std::size_t K = m.num_classes();
    const auto y = static_cast<std::size_t>(label);
    const double loss = -std::log(std::max(ws.prob[y], 1e-300));

    // d logits = p - onehot
    ws.prob[y] -= 1.0;
    for (std::size_t c = 0; c < K; ++c) g.b2[c] += ws.prob[c];
    ws.d_hidden.assign(h, 0.0);
    for (std::size_t j = 0; j < h; ++j) {
        const double hj = ws.hidden[j];
        auto w = m.w2.row(j);
        auto gw = g.w2.row(j);
        double acc = 0.0;
        for (std::size_t c = 0; c < K; ++c) {
            gw[c] += hj * ws.prob[c];
            acc += w[c] * ws.prob[c];
        }
        ws.d_hidden[j] = hj > 0.0 ? acc : 0.0;
    }
    for (std::size_t j = 0; j < h; ++j) g.b1[j] += ws.d_hidden[j];
    for (std::size_t k = 0; k < d; ++k) {
        const double xk = ws.x[k];
        if (xk == 0.0) continue;
        auto gw = g.w1.row(k);
        for (std::size_t j = 0; j < h; ++j) gw[j] += xk * ws.d_hidden[j];
    }
    return loss;
}

MlpGradient zero_gradient(const MlpModel& m) {
    MlpGradient g;
    g.w1 = Matrix(m.w1.rows(), m.w1.cols());
    g.b1.assign(m.b1.size(), 0.0);
    g.w2 = Matrix(m.w2.rows(), m.w2.cols());
    g.b2.assign(m.b2.size(), 0.0);
    return g;
}

void check_labels(std::span<const int> labels, std::size_t n, int num_classes) {
    if (labels.size() != n) throw DimensionError("extractor: labels and feature rows disagree");
    for (int l : labels)
        if (l < 0 || l >= num_classes) throw DimensionError("extractor: label out of range");
}

MlpModel train_mlp(const Matrix& raw, std::span<const int> labels, int num_classes,
                   const ExtractorSpec& spec, const MlpModel* previous) {
    const std::size_t n = raw.rows();
    const std::size_t d = raw.cols();
    if (n == 0) throw DimensionError("extractor: empty training set");

    MlpModel m;
    if (previous) {
        if (previous->input_dim() != d || previous->num_classes() != static_cast<std::size_t>(num_classes))
            throw DimensionError("extractor: warm-start model shape mismatch");
        m = *previous;
    } else {
        m = init_mlp(d, static_cast<std::size_t>(spec.hidden_width),
                     static_cast<std::size_t>(num_classes), spec.seed);
        // Columns are centred and share one scale, so input geometry is kept up to
        // an isotropic factor. Per-column scales estimated from a handful of rows
        // would distort it.
        double pooled = 0.0;
        for (std::size_t k = 0; k < d; ++k) {
            double mean = 0.0;
            for (std::size_t i = 0; i < n; ++i) mean += raw(i, k);
            mean /= static_cast<double>(n);
            double var = 0.0;
            for (std::size_t i = 0; i < n; ++i) var += (raw(i, k) - mean) * (raw(i, k) - mean);
            pooled += var / static_cast<double>(n);
            m.input_mean[k] = mean;
        }
        pooled /= static_cast<double>(d);
        std::fill(m.input_scale.begin(), m.input_scale.end(), pooled > 1e-24 ? std::sqrt(pooled) : 1.0);
    }

    // Shuffling draws from a stream separate from initialization.
    std::mt19937_64 rng(spec.seed ^ 0x9E3779B97F4A7C15ULL);
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    auto velocity = zero_gradient(m);
    Workspace ws;
    const std::size_t batch = static_cast<std::size_t>(spec.batch_size);

    auto step = [&](std::vector<double>& param, const std::vector<double>& grad, std::vector<double>& vel,
                    double lr, double scale) {
        for (std::size_t k = 0; k < param.size(); ++k) {
            vel[k] = spec.momentum * vel[k] - lr * grad[k] * scale;
            param[k] += vel[k];
        }
    };
    auto step_m = [&](Matrix& param, const Matrix& grad, Matrix& vel, double lr, double scale) {
        auto p = param.values();
        auto g = grad.values();
        auto v = vel.values();
        for (std::size_t k = 0; k < p.size(); ++k) {
            v[k] = spec.momentum * v[k] - lr * g[k] * scale;
            p[k] += v[k];
        }
    };

    for (int epoch = 0; epoch < spec.epochs; ++epoch) {
        const double lr = learning_rate_at(spec, epoch);
        std::shuffle(order.begin(), order.end(), rng);
        double epoch_loss = 0.0;
        for (std::size_t start = 0; start < n; start += batch) {
            const std::size_t end = std::min(n, start + batch);
            auto g = zero_gradient(m);
            for (std::size_t r = start; r < end; ++r) {
                forward(m, raw.row(order[r]), ws);
                epoch_loss += backward(m, labels[order[r]], ws, g);
            }
            const double scale = 1.0 / static_cast<double>(end - start);
            step_m(m.w1, g.w1, velocity.w1, lr, scale);
            step(m.b1, g.b1, velocity.b1, lr, scale);
            step_m(m.w2, g.w2, velocity.w2, lr, scale);
            step(m.b2, g.b2, velocity.b2, lr, scale);
        }
        if (!std::isfinite(epoch_loss))
            throw DivergenceError("extractor: non-finite training loss at epoch " + std::to_string(epoch),
                                  epoch);
    }
    return m;
}

// ---------------------------------------------------------------------------
// External protocol
// ---------------------------------------------------------------------------

std::filesystem::path scratch_root(const ExtractorSpec& spec) {
    if (!spec.work_dir.empty()) return spec.work_dir;
    return std::filesystem::temp_directory_path() / "deepfa-extractor";
}

std::filesystem::path fresh_dir(const std::filesystem::path& parent, const std::string& stem) {
    for (int k = 0;; ++k) {
        auto p = parent / (stem + "-" + std::to_string(k));
        if (!std::filesystem::exists(p)) return p;
    }
}

void run_verb(const std::string& command, const std::string& args, const std::filesystem::path& scratch) {
    const auto result = run_shell(command + " " + args, scratch);
    if (result.exit_code != 0)
        throw ExtractorError("extractor command '" + command + "' failed with exit code " +
                                 std::to_string(result.exit_code),
                             result.diagnostics);
}

void write_protocol_labels(const std::filesystem::path& path, std::span<const int> labels) {
    std::string out = "id,label,supervised\n";
    for (std::size_t i = 0; i < labels.size(); ++i)
        out += std::to_string(i) + "," + std::to_string(labels[i]) + ",1\n";
    csv::write_text(path, out);
}

ExternalModel train_external(const Matrix& raw, std::span<const int> labels, int num_classes,
                             const ExtractorSpec& spec) {
    const auto root = scratch_root(spec);
    std::filesystem::create_directories(root);
    const auto scratch = fresh_dir(root, "train-" + std::to_string(spec.seed));
    std::filesystem::create_directories(scratch);
    const auto features = scratch / "features.dfa";
    const auto labels_csv = scratch / "labels.csv";
    write_dfa(features, raw);
    write_protocol_labels(labels_csv, labels);

    ExternalModel model;
    model.command = spec.external_command;
    model.model_dir = fresh_dir(root, "model-" + std::to_string(spec.seed));
    model.work_dir = root;
    model.num_classes = num_classes;
    model.input_dim = raw.cols();

    const std::string args = "train --features " + shell_quote(features.string()) + " --labels " +
                             shell_quote(labels_csv.string()) + " --model " +
                             shell_quote(model.model_dir.string()) + " --epochs " +
                             std::to_string(spec.epochs) + " --lr " + csv::format_real(spec.lr_initial) +
                             " --momentum " + csv::format_real(spec.momentum) + " --seed " +
                             std::to_string(spec.seed);
    run_verb(spec.external_command, args, scratch);
    return model;
}

Matrix extract_external(const ExternalModel& model, const Matrix& raw) {
    if (raw.cols() != model.input_dim)
        throw DimensionError("extractor: input has " + std::to_string(raw.cols()) +
                             " columns, model expects " + std::to_string(model.input_dim));
    const auto scratch = fresh_dir(model.work_dir, "extract");
    std::filesystem::create_directories(scratch);
    const auto in = scratch / "features.dfa";
    const auto out = scratch / "out.dfa";
    write_dfa(in, raw);
    run_verb(model.command,
             "extract --model " + shell_quote(model.model_dir.string()) + " --features " +
                 shell_quote(in.string()) + " --out " + shell_quote(out.string()),
             scratch);
    Matrix features;
    try {
        features = read_dfa(out);
    } catch (const Error& e) {
        throw ExtractorError(std::string("extractor protocol violation: ") + e.what());
    }
    if (features.rows() != raw.rows())
        throw ExtractorError("extractor protocol violation: extract returned " +
                             std::to_string(features.rows()) + " rows for " +
                             std::to_string(raw.rows()) + " inputs");
    std::filesystem::remove_all(scratch);
    return features;
}

PredictionResult predict_external(const ExternalModel& model, const Matrix& raw) {
    if (raw.cols() != model.input_dim)
        throw DimensionError("extractor: input has " + std::to_string(raw.cols()) +
                             " columns, model expects " + std::to_string(model.input_dim));
    const auto scratch = fresh_dir(model.work_dir, "predict");
    std::filesystem::create_directories(scratch);
    const auto in = scratch / "features.dfa";
    const auto out = scratch / "probs.csv";
    write_dfa(in, raw);
    run_verb(model.command,
             "predict --model " + shell_quote(model.model_dir.string()) + " --features " +
                 shell_quote(in.string()) + " --out " + shell_quote(out.string()),
             scratch);

    PredictionResult result;
    try {
        const auto table = csv::read(out);
        const auto K = static_cast<std::size_t>(model.num_classes);
        if (table.header.size() != K + 1 || table.header[0] != "id")
            throw ExtractorError("extractor protocol violation: expected header id,p0..p" +
                                 std::to_string(K - 1));
        if (table.rows.size() != raw.rows())
            throw ExtractorError("extractor protocol violation: predict returned " +
                                 std::to_string(table.rows.size()) + " rows for " +
                                 std::to_string(raw.rows()) + " inputs");
        result.probabilities = Matrix(raw.rows(), K);
        for (std::size_t i = 0; i < table.rows.size(); ++i) {
            const auto where = out.string() + ": line " + std::to_string(table.line_numbers[i]);
            if (table.rows[i][0] != std::to_string(i))
                throw ExtractorError("extractor protocol violation: " + where + ": unexpected id");
            double sum = 0.0;
            for (std::size_t k = 0; k < K; ++k) {
                const double p = csv::parse_real(table.rows[i][k + 1], where);
                if (!(p >= 0.0) || !std::isfinite(p))
                    throw ExtractorError("extractor protocol violation: " + where + ": bad probability");
                result.probabilities(i, k) = p;
                sum += p;
            }
            if (std::abs(sum - 1.0) > 1e-5)
                throw ExtractorError("extractor protocol violation: " + where + ": row sums to " +
                                     csv::format_real(sum));
        }
    } catch (const ExtractorError&) {
        throw;
    } catch (const Error& e) {
        throw ExtractorError(std::string("extractor protocol violation: ") + e.what());
    }
    result.predicted_label = argmax_rows(result.probabilities);
    std::filesystem::remove_all(scratch);
    return result;
}

}  // namespace

MlpModel init_mlp(std::size_t input_dim, std::size_t hidden_width, std::size_t num_classes,
                  std::uint64_t seed) {
    MlpModel m;
    m.input_mean.assign(input_dim, 0.0);
    m.input_scale.assign(input_dim, 1.0);
    m.w1 = Matrix(input_dim, hidden_width);
    m.b1.assign(hidden_width, 0.0);
    m.w2 = Matrix(hidden_width, num_classes);
    m.b2.assign(num_classes, 0.0);
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> he(0.0, std::sqrt(2.0 / static_cast<double>(std::max<std::size_t>(input_dim, 1))));
    std::normal_distribution<double> glorot(
        0.0, std::sqrt(2.0 / static_cast<double>(hidden_width + num_classes)));
    for (auto& v : m.w1.values()) v = he(rng);
    for (auto& v : m.w2.values()) v = glorot(rng);
    return m;
}

MlpGradient mlp_loss_gradient(const MlpModel& model, const Matrix& raw, std::span<const int> labels) {
    check_input(model, raw);
    check_labels(labels, raw.rows(), static_cast<int>(model.num_classes()));
    auto g = zero_gradient(model);
    Workspace ws;
    for (std::size_t i = 0; i < raw.rows(); ++i) {
        forward(model, raw.row(i), ws);
        g.loss += backward(model, labels[i], ws, g);
    }
    const double scale = 1.0 / static_cast<double>(raw.rows());
    g.loss *= scale;
    for (auto& v : g.w1.values()) v *= scale;
    for (auto& v : g.b1) v *= scale;
    for (auto& v : g.w2.values()) v *= scale;
    for (auto& v : g.b2) v *= scale;
    return g;
}

ExtractorModel train_extractor(const Matrix& raw, std::span<const int> labels, int num_classes,
                               const ExtractorSpec& spec, const ExtractorModel* previous) {
    spec.validate();
    if (num_classes < 1) throw SpecError("extractor: need at least one class");
    check_labels(labels, raw.rows(), num_classes);
    for (double v : raw.values())
        if (!std::isfinite(v)) throw DimensionError("extractor: non-finite input feature");
    if (spec.kind == ExtractorKind::external) return train_external(raw, labels, num_classes, spec);
    const MlpModel* warm = nullptr;
    if (spec.warm_start && previous) warm = std::get_if<MlpModel>(previous);
    return train_mlp(raw, labels, num_classes, spec, warm);
}

Matrix extract_features(const ExtractorModel& model, const Matrix& raw) {
    if (const auto* ext = std::get_if<ExternalModel>(&model)) return extract_external(*ext, raw);
    const auto& m = std::get<MlpModel>(model);
    check_input(m, raw);
    Matrix out(raw.rows(), m.hidden_width());
    Workspace ws;
    for (std::size_t i = 0; i < raw.rows(); ++i) {
        forward(m, raw.row(i), ws);
        std::copy(ws.hidden.begin(), ws.hidden.end(), out.row(i).begin());
    }
    return out;
}

PredictionResult predict(const ExtractorModel& model, const Matrix& raw) {
    if (const auto* ext = std::get_if<ExternalModel>(&model)) return predict_external(*ext, raw);
    const auto& m = std::get<MlpModel>(model);
    check_input(m, raw);
    PredictionResult r;
    r.probabilities = Matrix(raw.rows(), m.num_classes());
    Workspace ws;
    for (std::size_t i = 0; i < raw.rows(); ++i) {
        forward(m, raw.row(i), ws);
        std::copy(ws.prob.begin(), ws.prob.end(), r.probabilities.row(i).begin());
    }
    r.predicted_label = argmax_rows(r.probabilities);
    return r;
}

}  // namespace deepfa::extractor
