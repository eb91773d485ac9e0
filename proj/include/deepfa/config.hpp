#pragma once

#include "deepfa/experiment.hpp"
#include "deepfa/metrics.hpp"

#include "json.hpp"

namespace deepfa {

// Keys mirror the ExperimentConfig field names. Unknown keys are rejected.
nlohmann::json config_to_json(const ExperimentConfig& cfg);
void apply_config_json(const nlohmann::json& j, ExperimentConfig& cfg);
ExperimentConfig load_config(const std::filesystem::path& path);

nlohmann::json metric_record_json(const metrics::MetricRecord& r, int iteration, std::uint64_t seed);
nlohmann::json aggregate_json(const metrics::AggregateRecord& a);
metrics::AggregateRecord aggregate_from_json(const nlohmann::json& j);

}  // namespace deepfa
