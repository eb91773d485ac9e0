#include "deepfa/artifacts.hpp"
#include "deepfa/config.hpp"
#include "deepfa/csv.hpp"
#include "deepfa/dataset.hpp"
#include "deepfa/error.hpp"
#include "deepfa/experiment.hpp"
#include "deepfa/report.hpp"
#include "deepfa/tsne.hpp"

#include "CLI11.hpp"
#include "json.hpp"

#include <filesystem>
#include <iostream>
#include <optional>

namespace fs = std::filesystem;
using namespace deepfa;

namespace {

struct Globals {
    std::optional<std::uint64_t> seed;
    int threads = 1;
    std::string config_path;
};

struct ExperimentFlags {
    std::optional<int> iterations;
    std::optional<int> partitions;
    std::optional<double> test_frac;
    std::optional<double> perplexity;
    std::optional<int> tsne_iterations;
    std::optional<int> epochs;
    std::optional<int> hidden_width;
    std::optional<double> lr;
    std::optional<int> batch_size;
    std::string extractor;
    bool warm_start = false;
};

void add_tsne_flags(CLI::App* cmd, ExperimentFlags& f) {
    cmd->add_option("--perplexity", f.perplexity, "t-SNE perplexity");
    cmd->add_option("--tsne-iterations", f.tsne_iterations, "t-SNE gradient steps");
}

void add_experiment_flags(CLI::App* cmd, ExperimentFlags& f) {
    cmd->add_option("--iterations", f.iterations, "Loop iterations for deepfa-loop");
    cmd->add_option("--partitions", f.partitions, "Number of stratified partitions");
    cmd->add_option("--test", f.test_frac, "Test fraction");
    add_tsne_flags(cmd, f);
    cmd->add_option("--epochs", f.epochs, "Extractor training epochs");
    cmd->add_option("--hidden", f.hidden_width, "Builtin extractor hidden width");
    cmd->add_option("--lr", f.lr, "Extractor initial learning rate");
    cmd->add_option("--batch-size", f.batch_size, "Extractor mini-batch size");
    cmd->add_option("--extractor", f.extractor, "builtin or cmd:<command>");
    cmd->add_flag("--warm-start", f.warm_start, "Continue training from the previous iteration's weights");
}

// Defaults, then the config file, then explicit flags.
ExperimentConfig resolve_config(const Globals& g, const ExperimentFlags& f) {
    ExperimentConfig cfg;
    bool lr_from_config = false;
    if (!g.config_path.empty()) {
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(csv::read_text(g.config_path));
        } catch (const nlohmann::json::exception& e) {
            throw UsageError("config '" + g.config_path + "': " + e.what());
        }
        apply_config_json(j, cfg);
        lr_from_config = j.contains("extractor") && j["extractor"].contains("lr_initial");
    }
    if (g.seed) {
        cfg.split.seed = *g.seed;
        cfg.base_seed = *g.seed;
        cfg.extractor.seed = *g.seed;
    }
    cfg.threads = g.threads;
    cfg.tsne.threads = g.threads;
    if (f.iterations) cfg.iterations = *f.iterations;
    if (f.partitions) cfg.partitions = *f.partitions;
    if (f.test_frac) cfg.split.test_frac = *f.test_frac;
    if (f.perplexity) cfg.tsne.perplexity = *f.perplexity;
    if (f.tsne_iterations) cfg.tsne.iterations = *f.tsne_iterations;
    if (f.epochs) cfg.extractor.epochs = *f.epochs;
    if (f.hidden_width) cfg.extractor.hidden_width = *f.hidden_width;
    if (f.batch_size) cfg.extractor.batch_size = *f.batch_size;
    if (f.warm_start) cfg.extractor.warm_start = true;
    if (!f.extractor.empty()) {
        if (f.extractor == "builtin" || f.extractor == "builtin-mlp") {
            cfg.extractor.kind = extractor::ExtractorKind::builtin_mlp;
        } else if (f.extractor.rfind("cmd:", 0) == 0 && f.extractor.size() > 4) {
            cfg.extractor.kind = extractor::ExtractorKind::external;
            cfg.extractor.external_command = f.extractor.substr(4);
        } else {
            throw UsageError("--extractor expects 'builtin' or 'cmd:<command>', got '" + f.extractor + "'");
        }
    }
    // Pretrained external models are fine-tuned with a smaller step.
    if (cfg.extractor.kind == extractor::ExtractorKind::external && !lr_from_config)
        cfg.extractor.lr_initial = 1e-4;
    if (f.lr) cfg.extractor.lr_initial = *f.lr;
    return cfg;
}

std::vector<double> parse_fractions(const std::vector<std::string>& items) {
    std::vector<double> out;
    for (const auto& item : items) {
        for (const auto& part : csv::split_line(item)) {
            try {
                out.push_back(csv::parse_real(part, "--x"));
            } catch (const Error&) {
                throw UsageError("--x: not a number: '" + part + "'");
            }
        }
    }
    return out;
}

std::vector<Mode> parse_modes(const std::vector<std::string>& items) {
    std::vector<Mode> out;
    for (const auto& item : items)
        for (const auto& part : csv::split_line(item)) out.push_back(parse_mode(part));
    return out;
}

int cmd_split(const Globals& g, const std::string& input, const std::string& format, double x,
              double test_frac, const std::string& out) {
    ExperimentConfig cfg;
    if (!g.config_path.empty()) cfg = load_config(g.config_path);
    SplitSpec spec = cfg.split;
    spec.x = x;
    spec.test_frac = test_frac;
    if (g.seed) spec.seed = *g.seed;
    spec.validate();
    const auto ds = load_dataset(input, parse_dataset_format(format));
    const auto split = stratified_split(ds, spec);
    write_split(fs::path(out) / "split.csv", ds, split);
    std::cout << "S=" << split.counts.supervised << " U=" << split.counts.unsupervised
              << " T=" << split.counts.test << "\n";
    return 0;
}

int cmd_run(const Globals& g, const ExperimentFlags& f, const std::string& input, const std::string& format,
            const std::vector<std::string>& mode_args, const std::vector<std::string>& x_args,
            const std::string& out, std::string dataset_name, bool no_plots) {
    auto cfg = resolve_config(g, f);
    if (no_plots) cfg.write_plots = false;
    std::vector<Mode> modes = mode_args.empty() ? std::vector<Mode>{cfg.mode} : parse_modes(mode_args);
    std::vector<double> xs = x_args.empty() ? std::vector<double>{cfg.split.x} : parse_fractions(x_args);
    if (cfg.extractor.kind == extractor::ExtractorKind::external && cfg.extractor.work_dir.empty())
        cfg.extractor.work_dir = fs::path(out) / "scratch";
    const auto ds = load_dataset(input, parse_dataset_format(format));
    if (dataset_name.empty()) dataset_name = fs::path(input).stem().string();

    const auto runs = run_grid(ds, xs, modes, cfg);
    for (const auto& run : runs) write_run(out, ds, run);
    write_summary(fs::path(out) / "summary.json", dataset_name, ds, runs);

    int status = 0;
    for (const auto& run : runs) {
        std::cout << to_string(run.config.mode) << " x=" << format_fraction(run.config.split.x);
        if (!run.aggregates.empty()) {
            const auto& a = run.final_aggregate();
            std::cout << " accuracy=" << csv::format_real(a.accuracy.mean)
                      << " kappa=" << csv::format_real(a.kappa.mean);
            if (a.propagation_accuracy)
                std::cout << " propagation=" << csv::format_real(a.propagation_accuracy->mean);
        }
        std::cout << "\n";
        if (auto err = run.first_error()) {
            std::cerr << "error: " << to_string(run.config.mode) << " x=" << format_fraction(run.config.split.x)
                      << ": " << *err << "\n";
            status = static_cast<int>(ExitCode::component);
        }
    }
    return status;
}

int cmd_project(const Globals& g, const ExperimentFlags& f, const std::string& input, const std::string& format,
                const std::string& out, const std::string& loss_out) {
    const auto cfg = resolve_config(g, f);
    Matrix features;
    std::vector<std::string> ids;
    const auto fmt = parse_dataset_format(format);
    if (fmt == DatasetFormat::dfa_binary && !fs::exists(labels_sidecar_path(input))) {
        features = read_dfa(input);
        for (std::size_t i = 0; i < features.rows(); ++i) ids.push_back(std::to_string(i));
    } else {
        auto ds = load_dataset(input, fmt);
        features = std::move(ds.features);
        ids = std::move(ds.ids);
    }
    auto params = cfg.tsne;
    params.seed = cfg.base_seed;
    const auto emb = tsne::embed(features, params, ids);
    write_embedding_csv(out, ids, emb.y);
    if (!loss_out.empty()) write_loss_csv(loss_out, emb.loss);
    std::cout << "embedded " << ids.size() << " samples, final KL " << csv::format_real(emb.loss.back().kl)
              << "\n";
    return 0;
}

int cmd_plot(const std::string& embedding, const std::string& labels, const std::string& confidence,
             const std::string& color, const std::string& out, const report::PlotStyle& style) {
    report::PlotSpec spec;
    spec.embedding_file = embedding;
    spec.labels_file = labels;
    if (!confidence.empty()) spec.confidence_file = confidence;
    spec.color_mode = report::parse_color_mode(color);
    spec.style = style;
    csv::write_text(out, report::render_scatter(spec));
    return 0;
}

int cmd_report(const std::vector<std::string>& runs, const std::string& out) {
    std::vector<fs::path> dirs(runs.begin(), runs.end());
    const auto text = report::report_csv(report::build_report(dirs));
    if (out.empty() || out == "-")
        std::cout << text;
    else
        csv::write_text(out, text);
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Deep feature annotation: projection-guided label propagation for small labelled sets"};
    app.require_subcommand(1);
    app.fallthrough();
    Globals g;
    app.add_option("--seed", g.seed, "Seed for splits, projections and extractor initialization");
    app.add_option("--threads", g.threads, "Worker threads")->check(CLI::PositiveNumber);
    app.add_option("--config", g.config_path, "Experiment configuration JSON")->check(CLI::ExistingFile);

    std::string input;
    std::string format = "csv";
    std::string out;

    auto* split = app.add_subcommand("split", "Write a stratified S/U/T split and print its counts");
    double x = 0.01;
    double test_frac = 0.30;
    split->add_option("--input", input, "Dataset file")->required();
    split->add_option("--format", format, "csv or dfa");
    split->add_option("--x", x, "Supervised fraction");
    split->add_option("--test", test_frac, "Test fraction");
    split->add_option("--out", out, "Output directory")->required();

    auto* run = app.add_subcommand("run", "Run baseline / deepfa / deepfa-loop experiments");
    ExperimentFlags flags;
    std::vector<std::string> modes;
    std::vector<std::string> xs;
    std::string dataset_name;
    bool no_plots = false;
    run->add_option("--input", input, "Dataset file")->required();
    run->add_option("--format", format, "csv or dfa");
    run->add_option("--mode,--modes", modes, "baseline, deepfa, deepfa-loop (comma list allowed)");
    run->add_option("--x", xs, "Supervised fractions (comma list allowed)");
    run->add_option("--out", out, "Run directory")->required();
    run->add_option("--name", dataset_name, "Dataset name recorded in the summary");
    run->add_flag("--no-plots", no_plots, "Skip SVG output");
    add_experiment_flags(run, flags);

    auto* project = app.add_subcommand("project", "Embed a feature matrix in 2-D");
    std::string loss_out;
    project->add_option("--input", input, "Feature file")->required();
    project->add_option("--format", format, "csv or dfa");
    project->add_option("--out", out, "Embedding CSV")->required();
    project->add_option("--loss", loss_out, "Loss trace CSV");
    add_tsne_flags(project, flags);

    auto* plot = app.add_subcommand("plot", "Render an embedding as SVG");
    std::string embedding;
    std::string labels;
    std::string confidence;
    std::string color = "by-label";
    report::PlotStyle style;
    plot->add_option("--embedding", embedding, "Embedding CSV (id,y0,y1)")->required();
    plot->add_option("--labels", labels, "Labels CSV")->required();
    plot->add_option("--confidence", confidence, "Confidence CSV");
    plot->add_option("--color", color, "by-label or by-confidence");
    plot->add_option("--out", out, "SVG file")->required();
    plot->add_option("--width", style.width)->check(CLI::PositiveNumber);
    plot->add_option("--height", style.height)->check(CLI::PositiveNumber);
    plot->add_option("--radius", style.point_radius)->check(CLI::PositiveNumber);

    auto* rep = app.add_subcommand("report", "Tabulate final metrics of run directories");
    std::vector<std::string> run_dirs;
    rep->add_option("--runs", run_dirs, "Run directories containing summary.json")->required();
    rep->add_option("--out", out, "Report CSV (stdout when omitted)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return static_cast<int>(ExitCode::usage);
    }

    try {
        if (*split) return cmd_split(g, input, format, x, test_frac, out);
        if (*run) return cmd_run(g, flags, input, format, modes, xs, out, dataset_name, no_plots);
        if (*project) return cmd_project(g, flags, input, format, out, loss_out);
        if (*plot) return cmd_plot(embedding, labels, confidence, color, out, style);
        if (*rep) return cmd_report(run_dirs, out);
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return static_cast<int>(e.exit_code());
    } catch (const fs::filesystem_error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return static_cast<int>(ExitCode::data);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return static_cast<int>(ExitCode::component);
    }
    return static_cast<int>(ExitCode::usage);
}
