#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "fedsurf/cox.hpp"
#include "fedsurf/dataset.hpp"
#include "fedsurf/federation.hpp"
#include "fedsurf/forest.hpp"
#include "fedsurf/metrics.hpp"

namespace fedsurf {

struct MetricsConfig {
    std::size_t grid_points = 100;
    double lo_quantile = 0.05;
    double hi_quantile = 0.95;
};

// One experiment: repeated seeded runs of the requested models on one
// dataset, mirroring the protocol the aggregate tables are built from.
struct ExperimentSpec {
    std::string dataset_path;
    std::string schema_path;
    std::vector<std::string> models;  // fedsurf | fedsurf-ibs | cox-local | cox-fedavg
    FederationConfig federation;
    ForestParams forest;
    FedAvgConfig cox;
    MetricsConfig metrics;
    double test_fraction = 0.2;
    std::size_t repetitions = 5;
    std::uint64_t base_seed = 0;
    std::string output_dir;
    bool save_models = false;  // persist the last run's fitted models

    void validate() const;
    static ExperimentSpec from_json_text(const std::string& text);
    static ExperimentSpec from_json_file(const std::string& path);
};

struct RunOutcome {
    std::uint64_t seed = 0;
    bool failed = false;
    std::string error;
    std::vector<MetricsReport> reports;
    std::string message_log_jsonl;  // tree/quota traffic for this run
    // (file name, serialized JSON) per fitted model, when requested
    std::vector<std::pair<std::string, std::string>> model_artifacts;
};

struct AggregateRow {
    std::string model;
    std::string setting;
    std::string split_type;
    double c_index_mean = 0.0;
    double c_index_std = 0.0;
    double ibs_mean = 0.0;
    double ibs_std = 0.0;
    std::size_t n_runs = 0;
};

struct ExperimentSummary {
    std::vector<RunOutcome> runs;
    std::vector<AggregateRow> aggregate;

    bool all_succeeded() const;
    std::string reports_jsonl() const;
    std::string messages_jsonl() const;
    std::string reports_csv() const;
    // Human-readable table; values are scaled by 100 for presentation.
    std::string table_text() const;
};

std::vector<AggregateRow> aggregate_reports(const std::vector<RunOutcome>& runs);

// Runs the experiment on an already loaded dataset.
ExperimentSummary run_experiment_on(const SurvivalDataset& data, const ExperimentSpec& spec,
                                    unsigned n_jobs = 1);

// Loads the dataset, runs, and writes reports.jsonl, messages.jsonl and
// summary.txt into output_dir.
ExperimentSummary run_experiment(const ExperimentSpec& spec, unsigned n_jobs = 1);

}  // namespace fedsurf
