#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "deepfa/csv.hpp"
#include "deepfa/error.hpp"
#include "deepfa/experiment.hpp"
#include "support/synthetic.hpp"
#include "support/tempdir.hpp"

#include <filesystem>

using namespace deepfa;

namespace {

ExperimentConfig quick_config(Mode mode, double x = 0.05) {
    ExperimentConfig cfg;
    cfg.mode = mode;
    cfg.iterations = 2;
    cfg.partitions = 3;
    cfg.split.x = x;
    cfg.split.test_frac = 0.3;
    cfg.split.seed = 10;
    cfg.tsne.perplexity = 10;
    cfg.tsne.iterations = 300;
    cfg.tsne.exaggeration_iterations = 100;
    cfg.tsne.momentum_switch_iteration = 100;
    cfg.extractor.hidden_width = 16;
    cfg.extractor.epochs = 40;
    cfg.extractor.lr_initial = 0.05;
    cfg.extractor.batch_size = 8;
    cfg.extractor.seed = 3;
    cfg.write_plots = true;
    return cfg;
}

const Dataset& blobs() {
    static const Dataset ds = testing::make_blobs(180, 3, 6, 8.0, 42);
    return ds;
}

}  // namespace

TEST_CASE("mode names") {
    for (auto m : {Mode::baseline, Mode::deepfa, Mode::deepfa_loop}) CHECK(parse_mode(to_string(m)) == m);
    CHECK_THROWS_AS(parse_mode("loop"), UsageError);
    CHECK(quick_config(Mode::baseline).effective_iterations() == 0);
    CHECK(quick_config(Mode::deepfa).effective_iterations() == 1);
    CHECK(quick_config(Mode::deepfa_loop).effective_iterations() == 2);
}

TEST_CASE("config validation") {
    auto cfg = quick_config(Mode::deepfa);
    cfg.partitions = 0;
    CHECK_THROWS_AS(run_experiment(blobs(), cfg), SpecError);
    cfg = quick_config(Mode::deepfa);
    cfg.iterations = -1;
    CHECK_THROWS_AS(run_experiment(blobs(), cfg), SpecError);
    CHECK_THROWS_AS(run_deepfa(blobs(), quick_config(Mode::baseline)), SpecError);
    CHECK_THROWS_AS(run_baseline(blobs(), quick_config(Mode::deepfa)), SpecError);
}

TEST_CASE("baseline learns separable blobs") {
    const auto run = run_baseline(blobs(), quick_config(Mode::baseline, 0.1));
    REQUIRE(run.partitions.size() == 3);
    for (const auto& p : run.partitions) {
        CHECK_FALSE(p.error);
        REQUIRE(p.iterations.size() == 1);
        CHECK(p.iterations[0].metrics.accuracy >= 0.9);
        CHECK_FALSE(p.iterations[0].metrics.propagation_accuracy);
        CHECK(p.iterations[0].sample_indices.empty());
    }
    REQUIRE(run.aggregates.size() == 1);
    CHECK(run.final_aggregate().partition_count == 3);
}

TEST_CASE("loop structure and propagation quality") {
    const auto run = run_deepfa(blobs(), quick_config(Mode::deepfa_loop));
    REQUIRE(run.partitions.size() == 3);
    CHECK(run.aggregates.size() == 3);
    for (std::size_t p = 0; p < 3; ++p) {
        const auto& part = run.partitions[p];
        CHECK(part.split_seed == 10 + p);
        CHECK_FALSE(part.error);
        REQUIRE(part.iterations.size() == 3);
        for (int t = 1; t <= 2; ++t) {
            const auto& rec = part.iterations[static_cast<std::size_t>(t)];
            CHECK(rec.iteration == t);
            REQUIRE(rec.metrics.propagation_accuracy);
            CHECK(*rec.metrics.propagation_accuracy >= 0.9);
            const auto n = rec.sample_indices.size();
            CHECK(rec.embedding.rows() == n);
            CHECK(rec.embedding.cols() == 2);
            CHECK(rec.assigned_label.size() == n);
            CHECK(rec.confidence.size() == n);
            CHECK(rec.loss.size() == 301);
            // No test sample reaches propagation or retraining.
            CHECK_NOTHROW(audit_training_indices(part.split, rec.sample_indices));
            for (std::size_t r = 0; r < n; ++r) {
                CHECK(part.split.membership[rec.sample_indices[r]] != Split::T);
                if (rec.supervised[r]) {
                    CHECK(rec.assigned_label[r] == blobs().labels[rec.sample_indices[r]]);
                    CHECK(rec.confidence[r] == 1.0);
                }
            }
        }
    }
}

TEST_CASE("isolation audit rejects test indices") {
    const auto split = stratified_split(blobs(), SplitSpec{0.05, 0.3, 1});
    const auto t = split.indices_of(Split::T);
    std::vector<std::size_t> bad = split.training_indices();
    bad.push_back(t.front());
    CHECK_THROWS_WITH(audit_training_indices(split, bad), doctest::Contains("test isolation"));
    CHECK_NOTHROW(audit_training_indices(split, split.training_indices()));
}

TEST_CASE("zero loop iterations reproduce the baseline") {
    auto loop = quick_config(Mode::deepfa_loop);
    loop.iterations = 0;
    const auto a = run_experiment(blobs(), loop);
    const auto b = run_experiment(blobs(), quick_config(Mode::baseline));
    for (std::size_t p = 0; p < 3; ++p) {
        REQUIRE(a.partitions[p].iterations.size() == 1);
        CHECK(a.partitions[p].iterations[0].metrics == b.partitions[p].iterations[0].metrics);
    }
}

TEST_CASE("iteration 0 of deepfa matches the baseline") {
    const auto a = run_experiment(blobs(), quick_config(Mode::deepfa));
    const auto b = run_experiment(blobs(), quick_config(Mode::baseline));
    for (std::size_t p = 0; p < 3; ++p)
        CHECK(a.partitions[p].iterations[0].metrics == b.partitions[p].iterations[0].metrics);
}

TEST_CASE("runs are deterministic across thread counts") {
    auto cfg = quick_config(Mode::deepfa);
    const auto a = run_experiment(blobs(), cfg);
    cfg.threads = 4;
    const auto b = run_experiment(blobs(), cfg);
    for (std::size_t p = 0; p < 3; ++p) {
        REQUIRE(a.partitions[p].iterations.size() == b.partitions[p].iterations.size());
        for (std::size_t t = 0; t < a.partitions[p].iterations.size(); ++t) {
            const auto& ra = a.partitions[p].iterations[t];
            const auto& rb = b.partitions[p].iterations[t];
            CHECK(ra.metrics == rb.metrics);
            CHECK(ra.embedding == rb.embedding);
            CHECK(ra.confidence == rb.confidence);
        }
    }
}

TEST_CASE("single-class dataset") {
    const auto ds = testing::make_blobs(40, 1, 3, 0.0, 7);
    auto cfg = quick_config(Mode::deepfa, 0.1);
    const auto run = run_experiment(ds, cfg);
    for (const auto& p : run.partitions) {
        CHECK_FALSE(p.error);
        REQUIRE(p.iterations.size() == 2);
        CHECK(p.iterations[1].metrics.accuracy == 1.0);
        CHECK(p.iterations[1].metrics.kappa == 1.0);
        for (double c : p.iterations[1].confidence) CHECK(c == 1.0);
    }
}

TEST_CASE("partition errors are contained") {
    testing::TempDir tmp;
    auto cfg = quick_config(Mode::deepfa);
    cfg.extractor.kind = extractor::ExtractorKind::external;
    cfg.extractor.external_command = "/nonexistent/extractor-cmd";
    cfg.extractor.work_dir = tmp.path() / "scratch";
    const auto run = run_experiment(blobs(), cfg);
    REQUIRE(run.first_error());
    CHECK(run.first_error()->find("/nonexistent/extractor-cmd") != std::string::npos);
    CHECK(run.aggregates.empty());
    CHECK_THROWS(run.final_aggregate());
    write_run(tmp.path() / "out", blobs(), run);
    CHECK(std::filesystem::exists(tmp.path() / "out/deepfa/0.05/0/error.txt"));
    CHECK(std::filesystem::exists(tmp.path() / "out/deepfa/0.05/0/split.csv"));
}

TEST_CASE("divergence aborts only the affected iterations") {
    auto cfg = quick_config(Mode::deepfa_loop);
    cfg.tsne.learning_rate = 1e300;
    const auto run = run_experiment(blobs(), cfg);
    for (const auto& p : run.partitions) {
        REQUIRE(p.error);
        CHECK(p.iterations.size() == 1);  // iteration 0 survives
    }
    REQUIRE(run.aggregates.size() == 1);
}

TEST_CASE("grid layout and artifacts") {
    testing::TempDir tmp;
    auto cfg = quick_config(Mode::deepfa);
    cfg.partitions = 2;
    cfg.iterations = 1;
    const std::vector<double> xs{0.01, 0.02, 0.03, 0.04, 0.05};
    const auto runs = run_grid(blobs(), xs, {Mode::baseline, Mode::deepfa, Mode::deepfa_loop}, cfg);
    REQUIRE(runs.size() == 15);
    CHECK(runs[0].config.mode == Mode::baseline);
    CHECK(runs[4].config.split.x == 0.05);
    CHECK(runs[5].config.mode == Mode::deepfa);
    CHECK(runs[14].config.mode == Mode::deepfa_loop);
    for (const auto& r : runs) CHECK_FALSE(r.first_error());

    for (const auto& r : runs) write_run(tmp.path(), blobs(), r);
    write_summary(tmp.path() / "summary.json", "blobs", blobs(), runs);
    const auto it = tmp.path() / "deepfa" / "0.02" / "1" / "iter1";
    for (const char* f : {"embedding.csv", "labels.csv", "confidence.csv", "loss.csv", "metrics.json",
                          "plot_labels.svg", "plot_confidence.svg"})
        CHECK(std::filesystem::exists(it / f));
    CHECK(std::filesystem::exists(tmp.path() / "baseline" / "0.05" / "0" / "iter0" / "metrics.json"));
    CHECK_FALSE(std::filesystem::exists(tmp.path() / "baseline" / "0.05" / "0" / "iter1"));
    const auto summary = csv::read_text(tmp.path() / "summary.json");
    CHECK(summary.find("\"deepfa-loop\"") != std::string::npos);

    const auto labels = csv::read(it / "labels.csv");
    CHECK(labels.header ==
          std::vector<std::string>{"id", "assigned_label", "cost", "confidence", "supervised"});

    CHECK_THROWS_AS(run_grid(blobs(), {1.0}, {Mode::deepfa}, cfg), SpecError);
    CHECK_THROWS_AS(run_grid(blobs(), {}, {Mode::deepfa}, cfg), SpecError);
}

TEST_CASE("extractor seeds vary by partition and iteration") {
    auto cfg = quick_config(Mode::deepfa);
    cfg.partitions = 2;
    // Identical splits would still train different networks.
    const auto run = run_experiment(blobs(), cfg);
    CHECK(partition_seeds(cfg) == std::vector<std::uint64_t>{10, 11});
    CHECK(run.partitions[0].split.membership != run.partitions[1].split.membership);
}

TEST_CASE("two-blob benchmark with default components") {
    const auto ds = testing::make_two_blobs(300, 10, 8.0, 17);
    ExperimentConfig cfg;
    cfg.partitions = 1;
    cfg.split.seed = 5;

    SUBCASE("baseline at x = 0.05") {
        cfg.mode = Mode::baseline;
        cfg.split.x = 0.05;
        const auto run = run_experiment(ds, cfg);
        CHECK(run.final_aggregate().accuracy.mean >= 0.9);
    }
    SUBCASE("loop at x = 0.01") {
        cfg.split.x = 0.01;
        cfg.mode = Mode::baseline;
        const auto base = run_experiment(ds, cfg);
        cfg.mode = Mode::deepfa_loop;
        cfg.iterations = 3;
        const auto loop = run_experiment(ds, cfg);
        REQUIRE_FALSE(loop.first_error());
        const auto& iters = loop.partitions[0].iterations;
        REQUIRE(iters.size() == 4);
        CHECK(*iters[1].metrics.propagation_accuracy >= 0.9);
        CHECK(iters[1].metrics.kappa >= base.partitions[0].iterations[0].metrics.kappa);
        CHECK(iters[3].metrics.kappa >= iters[1].metrics.kappa - 0.02);
    }
}
