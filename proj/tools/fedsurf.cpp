// fedsurf: federated survival forest experiment runner.
//
//   fedsurf run    --config cfg.json [--seed N] [--models a,b] [--out DIR] [--jobs N]
//   fedsurf split  --config cfg.json [--out DIR] [--seed N]
//   fedsurf eval   --model m.json --train t.csv --test e.csv --schema s.json
//   fedsurf synth  --n N --d D --censor-rate R --seed S --out PREFIX
//
// FEDSURF_OUT sets the default output directory.

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "fedsurf/csv.hpp"
#include "fedsurf/errors.hpp"
#include "fedsurf/estimators.hpp"
#include "fedsurf/experiment.hpp"
#include "fedsurf/federation.hpp"
#include "fedsurf/forest_io.hpp"
#include "fedsurf/synthetic.hpp"

#include <json.hpp>

namespace fs = std::filesystem;
using namespace fedsurf;

namespace {

std::string default_out_dir() {
    const char* env = std::getenv("FEDSURF_OUT");
    return env ? env : "";
}

std::vector<std::string> split_csv_list(const std::string& list) {
    std::vector<std::string> out;
    std::string item;
    std::istringstream in(list);
    while (std::getline(in, item, ',')) {
        if (!item.empty()) out.push_back(item);
    }
    return out;
}

int cmd_run(const std::string& config_path, const std::string& seed_override,
            const std::string& models_override, const std::string& out_override,
            unsigned jobs, bool save_models) {
    ExperimentSpec spec = ExperimentSpec::from_json_file(config_path);
    if (!seed_override.empty()) spec.base_seed = std::stoull(seed_override);
    if (!models_override.empty()) spec.models = split_csv_list(models_override);
    if (!out_override.empty()) spec.output_dir = out_override;
    if (spec.output_dir.empty()) spec.output_dir = default_out_dir();
    spec.save_models = spec.save_models || save_models;
    spec.validate();

    const ExperimentSummary summary = run_experiment(spec, jobs);
    std::cout << summary.table_text();
    if (!spec.output_dir.empty()) {
        std::cout << "wrote " << spec.output_dir << "/reports.jsonl, messages.jsonl, summary.txt\n";
    }
    return summary.all_succeeded() ? 0 : 1;
}

int cmd_split(const std::string& config_path, const std::string& seed_override,
              const std::string& out_override) {
    ExperimentSpec spec = ExperimentSpec::from_json_file(config_path);
    if (!seed_override.empty()) spec.base_seed = std::stoull(seed_override);
    std::string out_dir = !out_override.empty() ? out_override
                          : !spec.output_dir.empty() ? spec.output_dir
                                                     : default_out_dir();
    if (out_dir.empty()) {
        std::cerr << "split: no output directory (use --out or FEDSURF_OUT)\n";
        return 1;
    }
    fs::create_directories(out_dir);

    const FeatureSchema schema = load_schema(spec.schema_path);
    const SurvivalDataset data = load_csv(spec.dataset_path, schema);
    auto [train, test] = train_test_split(data, spec.test_fraction, spec.base_seed);

    FederationConfig fed = spec.federation;
    fed.seed = spec.base_seed;
    fed.validate(train.size());
    std::vector<SurvivalDataset> shards;
    if (fed.split == SplitKind::Uniform) {
        shards = uniform_split(train, fed.n_clients, fed.seed);
    } else {
        shards = label_skew_split(train, fed.n_clients, fed.alpha, fed.min_client_samples,
                                  fed.n_label_bins, fed.seed);
    }

    save_csv(train, out_dir + "/train.csv");
    save_csv(test, out_dir + "/test.csv");
    for (std::size_t k = 0; k < shards.size(); ++k) {
        save_csv(shards[k], out_dir + "/shard_" + std::to_string(k) + ".csv");
    }

    // Per-client Kaplan-Meier curves in long CSV form for external plotting.
    std::ofstream km(out_dir + "/km_curves.csv", std::ios::binary);
    km << "client,time,survival\n";
    for (std::size_t k = 0; k < shards.size(); ++k) {
        const StepFunction s = kaplan_meier(shards[k]);
        km << k << ",0," << s.initial_value() << "\n";
        for (std::size_t i = 0; i < s.size(); ++i) {
            km << k << ',' << s.times()[i] << ',' << s.values()[i] << "\n";
        }
    }

    std::cout << "wrote " << shards.size() << " shards, train/test splits and km_curves.csv to "
              << out_dir << "\n";
    return 0;
}

int cmd_eval(const std::string& model_path, const std::string& train_path,
             const std::string& test_path, const std::string& schema_path,
             std::size_t grid_points) {
    const FeatureSchema schema = load_schema(schema_path);
    const SurvivalDataset train = load_csv(train_path, schema);
    const SurvivalDataset test = load_csv(test_path, schema);
    const EvalContext ctx = EvalContext::from_training(train, grid_points);

    std::ifstream in(model_path, std::ios::binary);
    if (!in) throw LoadError("cannot open model: " + model_path);
    std::ostringstream buf;
    buf << in.rdbuf();
    const std::string text = buf.str();
    const auto parsed = nlohmann::json::parse(text);
    const std::string format = parsed.value("format", "");

    MetricsReport report;
    if (format == "fedsurf-forest") {
        report = evaluate_forest(forest_from_json(text), test, ctx);
        report.model = "forest";
    } else if (format == "fedsurf-cox") {
        const CoxModel model = CoxModel::from_json(text);
        std::vector<double> risks(test.size());
        std::vector<StepFunction> curves;
        curves.reserve(test.size());
        for (std::size_t i = 0; i < test.size(); ++i) {
            risks[i] = cox_predict_risk(model, test[i].features);
            curves.push_back(cox_survival_curve(model, test[i].features));
        }
        report = evaluate_predictions(risks, curves, test, ctx);
        report.model = "cox";
    } else {
        throw LoadError("unrecognized model format in " + model_path);
    }
    report.setting = "eval";
    report.split_type = "none";
    std::cout << report.to_json() << "\n";
    return 0;
}

int cmd_synth(std::size_t n, std::size_t d, double censor_rate, std::uint64_t seed,
              const std::string& out_prefix) {
    const SurvivalDataset data = generate_synthetic(n, d, censor_rate, seed);
    save_csv(data, out_prefix + ".csv");
    std::ofstream schema(out_prefix + ".schema.json", std::ios::binary);
    schema << schema_to_json_text(data.schema());
    std::cout << "wrote " << out_prefix << ".csv (" << data.size() << " records, "
              << data.censored_count() << " censored)\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Federated survival forest simulator"};
    app.require_subcommand(1);

    std::string config_path, seed_override, models_override, out_override;
    unsigned jobs = 1;

    auto* run = app.add_subcommand("run", "Run a full experiment from a config file");
    run->add_option("--config", config_path, "Experiment config (JSON)")->required();
    run->add_option("--seed", seed_override, "Override the base seed");
    run->add_option("--models", models_override, "Comma-separated model list override");
    run->add_option("--out", out_override, "Output directory override");
    run->add_option("--jobs", jobs, "Max concurrent repetitions");
    bool save_models = false;
    run->add_flag("--save-models", save_models, "Write the last run's models to <out>/models/");

    auto* split = app.add_subcommand("split", "Materialize federation shards to disk");
    split->add_option("--config", config_path, "Experiment config (JSON)")->required();
    split->add_option("--seed", seed_override, "Override the base seed");
    split->add_option("--out", out_override, "Output directory");

    std::string model_path, train_path, test_path, schema_path;
    std::size_t grid_points = 100;
    auto* eval = app.add_subcommand("eval", "Re-score a serialized model");
    eval->add_option("--model", model_path, "Model JSON (forest or cox)")->required();
    eval->add_option("--train", train_path, "Training CSV (for censoring/grid)")->required();
    eval->add_option("--test", test_path, "Test CSV")->required();
    eval->add_option("--schema", schema_path, "Schema JSON")->required();
    eval->add_option("--grid-points", grid_points, "Evaluation grid size");

    std::size_t synth_n = 1000;
    std::size_t synth_d = 5;
    double censor_rate = 0.3;
    std::uint64_t synth_seed = 0;
    std::string out_prefix = "synthetic";
    auto* synth = app.add_subcommand("synth", "Generate a synthetic survival dataset");
    synth->add_option("--n", synth_n, "Number of records");
    synth->add_option("--d", synth_d, "Number of features");
    synth->add_option("--censor-rate", censor_rate, "Target censored fraction");
    synth->add_option("--seed", synth_seed, "Generator seed");
    synth->add_option("--out", out_prefix, "Output path prefix");

    CLI11_PARSE(app, argc, argv);

    try {
        if (run->parsed()) {
            return cmd_run(config_path, seed_override, models_override, out_override, jobs,
                           save_models);
        }
        if (split->parsed()) {
            return cmd_split(config_path, seed_override, out_override);
        }
        if (eval->parsed()) {
            return cmd_eval(model_path, train_path, test_path, schema_path, grid_points);
        }
        if (synth->parsed()) {
            return cmd_synth(synth_n, synth_d, censor_rate, synth_seed, out_prefix);
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
