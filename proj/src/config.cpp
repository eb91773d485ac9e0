#include "deepfa/config.hpp"

#include "deepfa/csv.hpp"
#include "deepfa/error.hpp"

#include <set>

namespace deepfa {

using nlohmann::json;

namespace {

std::string kind_name(extractor::ExtractorKind k) {
    return k == extractor::ExtractorKind::builtin_mlp ? "builtin-mlp" : "external";
}

extractor::ExtractorKind parse_kind(const std::string& s) {
    if (s == "builtin-mlp") return extractor::ExtractorKind::builtin_mlp;
    if (s == "external") return extractor::ExtractorKind::external;
    throw UsageError("config: unknown extractor kind '" + s + "'");
}

void check_keys(const json& j, const std::set<std::string>& allowed, const std::string& where) {
    if (!j.is_object()) throw UsageError("config: '" + where + "' must be an object");
    for (const auto& [key, value] : j.items())
        if (!allowed.count(key)) throw UsageError("config: unknown key '" + where + key + "'");
}

template <class T>
void read_if(const json& j, const char* key, T& out) {
    if (!j.contains(key)) return;
    try {
        out = j.at(key).get<T>();
    } catch (const json::exception& e) {
        throw UsageError(std::string("config: bad value for '") + key + "': " + e.what());
    }
}

json split_json(const SplitSpec& s) { return {{"x", s.x}, {"test_frac", s.test_frac}, {"seed", s.seed}}; }

json tsne_json(const tsne::TsneParams& p) {
    return {{"perplexity", p.perplexity},
            {"iterations", p.iterations},
            {"early_exaggeration_factor", p.early_exaggeration_factor},
            {"exaggeration_iterations", p.exaggeration_iterations},
            {"learning_rate", p.learning_rate},
            {"initial_momentum", p.initial_momentum},
            {"final_momentum", p.final_momentum},
            {"momentum_switch_iteration", p.momentum_switch_iteration},
            {"perplexity_tolerance", p.perplexity_tolerance},
            {"max_bisection_steps", p.max_bisection_steps},
            {"init_sigma", p.init_sigma},
            {"min_gain", p.min_gain},
            {"seed", p.seed}};
}

json extractor_json(const extractor::ExtractorSpec& e) {
    return {{"kind", kind_name(e.kind)},         {"hidden_width", e.hidden_width},
            {"epochs", e.epochs},                {"lr_initial", e.lr_initial},
            {"momentum", e.momentum},            {"batch_size", e.batch_size},
            {"seed", e.seed},                    {"external_command", e.external_command},
            {"warm_start", e.warm_start}};
}

}  // namespace

json config_to_json(const ExperimentConfig& cfg) {
    return {{"mode", to_string(cfg.mode)},
            {"iterations", cfg.iterations},
            {"split", split_json(cfg.split)},
            {"tsne", tsne_json(cfg.tsne)},
            {"extractor", extractor_json(cfg.extractor)},
            {"base_seed", cfg.base_seed},
            {"partitions", cfg.partitions}};
}

void apply_config_json(const json& j, ExperimentConfig& cfg) {
    check_keys(j, {"mode", "iterations", "split", "tsne", "extractor", "base_seed", "partitions"}, "");
    if (j.contains("mode")) cfg.mode = parse_mode(j.at("mode").get<std::string>());
    read_if(j, "iterations", cfg.iterations);
    read_if(j, "base_seed", cfg.base_seed);
    read_if(j, "partitions", cfg.partitions);
    if (j.contains("split")) {
        const auto& s = j.at("split");
        check_keys(s, {"x", "test_frac", "seed"}, "split.");
        read_if(s, "x", cfg.split.x);
        read_if(s, "test_frac", cfg.split.test_frac);
        read_if(s, "seed", cfg.split.seed);
    }
    if (j.contains("tsne")) {
        const auto& t = j.at("tsne");
        check_keys(t,
                   {"perplexity", "iterations", "early_exaggeration_factor", "exaggeration_iterations",
                    "learning_rate", "initial_momentum", "final_momentum", "momentum_switch_iteration",
                    "perplexity_tolerance", "max_bisection_steps", "init_sigma", "min_gain", "seed"},
                   "tsne.");
        read_if(t, "perplexity", cfg.tsne.perplexity);
        read_if(t, "iterations", cfg.tsne.iterations);
        read_if(t, "early_exaggeration_factor", cfg.tsne.early_exaggeration_factor);
        read_if(t, "exaggeration_iterations", cfg.tsne.exaggeration_iterations);
        read_if(t, "learning_rate", cfg.tsne.learning_rate);
        read_if(t, "initial_momentum", cfg.tsne.initial_momentum);
        read_if(t, "final_momentum", cfg.tsne.final_momentum);
        read_if(t, "momentum_switch_iteration", cfg.tsne.momentum_switch_iteration);
        read_if(t, "perplexity_tolerance", cfg.tsne.perplexity_tolerance);
        read_if(t, "max_bisection_steps", cfg.tsne.max_bisection_steps);
        read_if(t, "init_sigma", cfg.tsne.init_sigma);
        read_if(t, "min_gain", cfg.tsne.min_gain);
        read_if(t, "seed", cfg.tsne.seed);
    }
    if (j.contains("extractor")) {
        const auto& e = j.at("extractor");
        check_keys(e,
                   {"kind", "hidden_width", "epochs", "lr_initial", "momentum", "batch_size", "seed",
                    "external_command", "warm_start"},
                   "extractor.");
        if (e.contains("kind")) cfg.extractor.kind = parse_kind(e.at("kind").get<std::string>());
        read_if(e, "hidden_width", cfg.extractor.hidden_width);
        read_if(e, "epochs", cfg.extractor.epochs);
        read_if(e, "lr_initial", cfg.extractor.lr_initial);
        read_if(e, "momentum", cfg.extractor.momentum);
        read_if(e, "batch_size", cfg.extractor.batch_size);
        read_if(e, "seed", cfg.extractor.seed);
        read_if(e, "external_command", cfg.extractor.external_command);
        read_if(e, "warm_start", cfg.extractor.warm_start);
    }
}

ExperimentConfig load_config(const std::filesystem::path& path) {
    ExperimentConfig cfg;
    json j;
    try {
        j = json::parse(csv::read_text(path));
    } catch (const json::parse_error& e) {
        throw ParseError(path.string() + ": offset " + std::to_string(e.byte) + ": invalid JSON");
    }
    apply_config_json(j, cfg);
    return cfg;
}

json metric_record_json(const metrics::MetricRecord& r, int iteration, std::uint64_t seed) {
    json j;
    j["accuracy"] = r.accuracy;
    j["kappa"] = r.kappa;
    j["propagation_accuracy"] = r.propagation_accuracy ? json(*r.propagation_accuracy) : json(nullptr);
    j["iteration"] = iteration;
    j["seed"] = seed;
    return j;
}

json aggregate_json(const metrics::AggregateRecord& a) {
    auto summary = [](const metrics::Summary& s) { return json{{"mean", s.mean}, {"std", s.std}}; };
    json j;
    j["accuracy"] = summary(a.accuracy);
    j["kappa"] = summary(a.kappa);
    j["propagation_accuracy"] =
        a.propagation_accuracy ? summary(*a.propagation_accuracy) : json(nullptr);
    j["partition_count"] = a.partition_count;
    return j;
}

metrics::AggregateRecord aggregate_from_json(const json& j) {
    auto summary = [](const json& s) {
        return metrics::Summary{s.at("mean").get<double>(), s.at("std").get<double>()};
    };
    metrics::AggregateRecord a;
    a.accuracy = summary(j.at("accuracy"));
    a.kappa = summary(j.at("kappa"));
    if (!j.at("propagation_accuracy").is_null()) a.propagation_accuracy = summary(j.at("propagation_accuracy"));
    a.partition_count = j.at("partition_count").get<std::size_t>();
    return a;
}

}  // namespace deepfa
