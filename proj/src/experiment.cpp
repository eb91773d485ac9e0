#include "deepfa/experiment.hpp"

#include "deepfa/artifacts.hpp"
#include "deepfa/config.hpp"
#include "deepfa/csv.hpp"
#include "deepfa/error.hpp"
#include "deepfa/opf_semi.hpp"
#include "deepfa/parallel.hpp"
#include "deepfa/report.hpp"

#include <algorithm>

namespace deepfa {

std::string to_string(Mode mode) {
    switch (mode) {
    case Mode::baseline: return "baseline";
    case Mode::deepfa: return "deepfa";
    case Mode::deepfa_loop: return "deepfa-loop";
    }
    return "?";
}

Mode parse_mode(const std::string& name) {
    if (name == "baseline") return Mode::baseline;
    if (name == "deepfa") return Mode::deepfa;
    if (name == "deepfa-loop") return Mode::deepfa_loop;
    throw UsageError("unknown mode '" + name + "' (expected baseline, deepfa or deepfa-loop)");
}

int ExperimentConfig::effective_iterations() const {
    switch (mode) {
    case Mode::baseline: return 0;
    case Mode::deepfa: return 1;
    case Mode::deepfa_loop: return iterations;
    }
    return 0;
}

void ExperimentConfig::validate() const {
    if (iterations < 0) throw SpecError("iterations must be >= 0");
    if (partitions < 1) throw SpecError("partitions must be >= 1");
    if (threads < 1) throw SpecError("threads must be >= 1");
    split.validate();
    tsne.validate();
    extractor.validate();
}

const metrics::AggregateRecord& RunResult::final_aggregate() const {
    if (aggregates.empty()) throw Error("run has no completed iterations");
    return aggregates.back();
}

std::optional<std::string> RunResult::first_error() const {
    for (const auto& p : partitions)
        if (p.error) return p.error;
    return std::nullopt;
}

void audit_training_indices(const SplitAssignment& split, std::span<const std::size_t> indices) {
    for (auto i : indices)
        if (i >= split.membership.size() || split.membership[i] == Split::T)
            throw Error("test isolation violated: sample #" + std::to_string(i) +
                        " reached a training or propagation input");
}

std::vector<std::uint64_t> partition_seeds(const ExperimentConfig& cfg) {
    std::vector<std::uint64_t> seeds;
    for (int p = 0; p < cfg.partitions; ++p) seeds.push_back(cfg.split.seed + static_cast<std::uint64_t>(p));
    return seeds;
}

namespace {

std::vector<int> gather(std::span<const int> values, std::span<const std::size_t> idx) {
    std::vector<int> out;
    out.reserve(idx.size());
    for (auto i : idx) out.push_back(values[i]);
    return out;
}

metrics::MetricRecord evaluate(const extractor::ExtractorModel& model, const Dataset& ds,
                               std::span<const std::size_t> test_idx) {
    metrics::MetricRecord rec;
    if (test_idx.empty()) return rec;
    const auto pred = extractor::predict(model, ds.features.select_rows(test_idx));
    const auto truth = gather(ds.labels, test_idx);
    rec.accuracy = metrics::accuracy(pred.predicted_label, truth);
    rec.kappa = metrics::cohens_kappa(pred.predicted_label, truth);
    return rec;
}

// Extractor seeds differ per partition and iteration; iteration 0 matches the baseline.
std::uint64_t extractor_seed(const ExperimentConfig& cfg, std::size_t partition, int iteration) {
    return cfg.extractor.seed + 1009ULL * partition + static_cast<std::uint64_t>(iteration);
}

std::filesystem::path extractor_scratch(const ExperimentConfig& cfg, std::size_t partition) {
    if (cfg.extractor.work_dir.empty()) return {};
    return cfg.extractor.work_dir / (to_string(cfg.mode) + "-" + format_fraction(cfg.split.x) + "-p" +
                                     std::to_string(partition));
}

std::vector<metrics::AggregateRecord> aggregate_iterations(const std::vector<PartitionResult>& parts) {
    std::size_t max_iter = 0;
    for (const auto& p : parts) max_iter = std::max(max_iter, p.iterations.size());
    std::vector<metrics::AggregateRecord> out;
    for (std::size_t t = 0; t < max_iter; ++t) {
        std::vector<metrics::MetricRecord> recs;
        for (const auto& p : parts)
            if (t < p.iterations.size()) recs.push_back(p.iterations[t].metrics);
        out.push_back(metrics::aggregate(recs));
    }
    return out;
}

RunResult run_all_partitions(const Dataset& dataset, const ExperimentConfig& cfg) {
    cfg.validate();
    dataset.validate();
    const auto seeds = partition_seeds(cfg);
    const auto splits = make_partitions(dataset, cfg.split.x, cfg.split.test_frac, seeds);

    RunResult run;
    run.config = cfg;
    run.partitions.resize(splits.size());
    const int outer = std::min(cfg.threads, static_cast<int>(splits.size()));
    ExperimentConfig inner = cfg;
    inner.tsne.threads = std::max(1, cfg.threads / std::max(outer, 1));
    parallel_for(splits.size(), outer, [&](std::size_t p) {
        run.partitions[p] = run_partition(dataset, inner, splits[p], p);
        run.partitions[p].split_seed = seeds[p];
    });
    run.aggregates = aggregate_iterations(run.partitions);
    return run;
}

}  // namespace

PartitionResult run_partition(const Dataset& ds, const ExperimentConfig& cfg,
                              const SplitAssignment& split, std::size_t partition_index) {
    PartitionResult result;
    result.split = split;
    const auto s_idx = split.indices_of(Split::S);
    const auto t_idx = split.indices_of(Split::T);
    const auto su_idx = split.training_indices();
    const int K = static_cast<int>(ds.num_classes());

    try {
        audit_training_indices(split, s_idx);
        audit_training_indices(split, su_idx);

        auto spec = cfg.extractor;
        spec.work_dir = extractor_scratch(cfg, partition_index);
        spec.seed = extractor_seed(cfg, partition_index, 0);
        auto model = extractor::train_extractor(ds.features.select_rows(s_idx),
                                                gather(ds.labels, s_idx), K, spec);
        IterationRecord first;
        first.iteration = 0;
        first.metrics = evaluate(model, ds, t_idx);
        result.iterations.push_back(std::move(first));

        const Matrix su_raw = ds.features.select_rows(su_idx);
        std::vector<std::string> su_ids;
        std::vector<bool> supervised;
        opf::SeedSet seeds;
        seeds.num_classes = K;
        std::vector<std::size_t> u_pos;
        for (std::size_t r = 0; r < su_idx.size(); ++r) {
            su_ids.push_back(ds.ids[su_idx[r]]);
            const bool is_s = split.membership[su_idx[r]] == Split::S;
            supervised.push_back(is_s);
            if (is_s) {
                seeds.indices.push_back(r);
                seeds.labels.push_back(ds.labels[su_idx[r]]);
            } else {
                u_pos.push_back(r);
            }
        }
        const auto su_truth = gather(ds.labels, su_idx);
        const auto u_truth = gather(su_truth, u_pos);

        for (int t = 1; t <= cfg.effective_iterations(); ++t) {
            IterationRecord rec;
            rec.iteration = t;
            rec.sample_indices = su_idx;
            rec.supervised = supervised;

            const Matrix features = extractor::extract_features(model, su_raw);
            auto tsne_params = cfg.tsne;
            tsne_params.seed = cfg.base_seed + static_cast<std::uint64_t>(t);
            auto emb = tsne::embed(features, tsne_params, su_ids);
            rec.embedding = std::move(emb.y);
            rec.loss = std::move(emb.loss);

            const auto forest = opf::propagate_labels(rec.embedding, seeds);
            rec.assigned_label = forest.assigned_label;
            rec.cost = forest.cost;
            rec.confidence = opf::confidence(forest.class_costs, rec.assigned_label, supervised);

            for (std::size_t s = 0; s < seeds.indices.size(); ++s)
                if (rec.assigned_label[seeds.indices[s]] != seeds.labels[s])
                    throw Error("supervised label overwritten during propagation");

            std::optional<double> prop;
            if (!u_pos.empty())
                prop = metrics::propagation_accuracy(gather(rec.assigned_label, u_pos), u_truth);

            spec.seed = extractor_seed(cfg, partition_index, t);
            auto next = extractor::train_extractor(su_raw, rec.assigned_label, K, spec, &model);
            model = std::move(next);

            rec.metrics = evaluate(model, ds, t_idx);
            rec.metrics.propagation_accuracy = prop;
            result.iterations.push_back(std::move(rec));
        }
    } catch (const Error& e) {
        result.error = e.what();
    }
    return result;
}

RunResult run_baseline(const Dataset& dataset, const ExperimentConfig& cfg) {
    if (cfg.mode != Mode::baseline) throw SpecError("run_baseline requires mode baseline");
    return run_all_partitions(dataset, cfg);
}

RunResult run_deepfa(const Dataset& dataset, const ExperimentConfig& cfg) {
    if (cfg.mode == Mode::baseline) throw SpecError("run_deepfa requires mode deepfa or deepfa-loop");
    return run_all_partitions(dataset, cfg);
}

RunResult run_experiment(const Dataset& dataset, const ExperimentConfig& cfg) {
    return cfg.mode == Mode::baseline ? run_baseline(dataset, cfg) : run_deepfa(dataset, cfg);
}

std::vector<RunResult> run_grid(const Dataset& dataset, const std::vector<double>& x_values,
                                const std::vector<Mode>& modes, const ExperimentConfig& base) {
    if (x_values.empty()) throw SpecError("run_grid needs at least one x value");
    if (modes.empty()) throw SpecError("run_grid needs at least one mode");
    for (double x : x_values)
        if (!(x > 0.0 && x < 1.0)) throw SpecError("grid x values must lie in (0, 1)");
    std::vector<RunResult> out;
    for (auto mode : modes) {
        for (double x : x_values) {
            auto cfg = base;
            cfg.mode = mode;
            cfg.split.x = x;
            out.push_back(run_experiment(dataset, cfg));
        }
    }
    return out;
}

std::string format_fraction(double x) { return csv::format_real(x); }

void write_run(const std::filesystem::path& out, const Dataset& ds, const RunResult& run) {
    const auto base = out / to_string(run.config.mode) / format_fraction(run.config.split.x);
    for (std::size_t p = 0; p < run.partitions.size(); ++p) {
        const auto& part = run.partitions[p];
        const auto pdir = base / std::to_string(p);
        std::filesystem::create_directories(pdir);
        write_split(pdir / "split.csv", ds, part.split);
        for (const auto& rec : part.iterations) {
            const auto dir = pdir / ("iter" + std::to_string(rec.iteration));
            std::filesystem::create_directories(dir);
            csv::write_text(dir / "metrics.json",
                            metric_record_json(rec.metrics, rec.iteration, part.split_seed).dump(2) + "\n");
            if (rec.sample_indices.empty()) continue;
            std::vector<std::string> ids;
            for (auto i : rec.sample_indices) ids.push_back(ds.ids[i]);
            write_embedding_csv(dir / "embedding.csv", ids, rec.embedding);
            write_propagation_csv(dir / "labels.csv", ids, rec.assigned_label, rec.cost, rec.confidence,
                                  rec.supervised);
            write_confidence_csv(dir / "confidence.csv", ids, rec.confidence);
            write_loss_csv(dir / "loss.csv", rec.loss);
            if (run.config.write_plots) {
                report::PlotStyle style;
                csv::write_text(dir / "plot_labels.svg",
                                report::render_scatter(rec.embedding,
                                                       report::label_fills(rec.assigned_label, rec.supervised),
                                                       style));
                csv::write_text(dir / "plot_confidence.svg",
                                report::render_scatter(rec.embedding,
                                                       report::confidence_fills(rec.confidence), style));
            }
        }
        if (part.error) csv::write_text(pdir / "error.txt", *part.error + "\n");
    }
}

void write_summary(const std::filesystem::path& path, const std::string& dataset_name,
                   const Dataset& dataset, const std::vector<RunResult>& runs) {
    nlohmann::json j;
    j["dataset"] = dataset_name;
    j["class_names"] = dataset.class_names;
    j["n"] = dataset.size();
    auto arr = nlohmann::json::array();
    for (const auto& run : runs) {
        nlohmann::json r;
        r["mode"] = to_string(run.config.mode);
        r["x"] = run.config.split.x;
        r["partitions"] = run.partitions.size();
        r["config"] = config_to_json(run.config);
        auto errors = nlohmann::json::array();
        for (std::size_t p = 0; p < run.partitions.size(); ++p)
            if (run.partitions[p].error)
                errors.push_back({{"partition", p}, {"message", *run.partitions[p].error}});
        r["errors"] = errors;
        auto iters = nlohmann::json::array();
        for (std::size_t t = 0; t < run.aggregates.size(); ++t) {
            auto a = aggregate_json(run.aggregates[t]);
            a["iteration"] = t;
            iters.push_back(a);
        }
        r["iterations"] = iters;
        r["final"] = run.aggregates.empty() ? nlohmann::json(nullptr) : aggregate_json(run.aggregates.back());
        arr.push_back(r);
    }
    j["runs"] = arr;
    csv::write_text(path, j.dump(2) + "\n");
}

}  // namespace deepfa
