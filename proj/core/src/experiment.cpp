#include "fedsurf/experiment.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "fedsurf/csv.hpp"
#include "fedsurf/errors.hpp"
#include "fedsurf/estimators.hpp"
#include "fedsurf/forest_io.hpp"

namespace fedsurf {

namespace {

using nlohmann::json;

const std::vector<std::string> kKnownModels = {"fedsurf", "fedsurf-ibs", "cox-local",
                                               "cox-fedavg"};

MetricsReport mean_report(const std::vector<MetricsReport>& parts) {
    MetricsReport out;
    if (parts.empty()) return out;
    const auto n = static_cast<double>(parts.size());
    for (const auto& p : parts) {
        out.c_index += p.c_index;
        out.ibs += p.ibs;
    }
    out.c_index /= n;
    out.ibs /= n;
    out.brier_times = parts.front().brier_times;
    out.brier_values.assign(out.brier_times.size(), 0.0);
    for (const auto& p : parts) {
        for (std::size_t k = 0; k < out.brier_values.size(); ++k) {
            out.brier_values[k] += p.brier_values[k];
        }
    }
    for (auto& v : out.brier_values) v /= n;
    return out;
}

// Local/federated rows of one model for one seeded run. Every model sees
// the same client shards because the shard split depends only on
// (train, federation.seed, split kind).
void run_model(const std::string& model, const SurvivalDataset& train,
               const SurvivalDataset& test, const EvalContext& ctx,
               const ExperimentSpec& spec, std::uint64_t seed, RunOutcome& outcome,
               unsigned n_jobs) {
    FederationConfig fed = spec.federation;
    fed.seed = seed;
    ForestParams forest = spec.forest;
    forest.seed = seed;
    const std::string split_name = to_string(fed.split);

    auto push = [&](MetricsReport r, const std::string& setting) {
        r.model = model;
        r.setting = setting;
        r.split_type = split_name;
        r.seed = seed;
        outcome.reports.push_back(std::move(r));
    };

    if (model == "fedsurf" || model == "fedsurf-ibs") {
        fed.sampling =
            model == "fedsurf" ? SamplingStrategy::Uniform : SamplingStrategy::InverseIbs;
        const FedSurfResult result = run_fedsurf(train, fed, forest, n_jobs);
        push(evaluate_forest(result.server.ensemble, test, ctx), "federated");
        // Both sampling strategies share identical local forests, so only
        // the uniform run emits the local row.
        if (model == "fedsurf") {
            push(mean_report(run_local_baselines(result.clients, test, ctx)), "local");
        }
        outcome.message_log_jsonl += result.server.log.to_jsonl();
        if (spec.save_models) {
            outcome.model_artifacts.emplace_back(model + ".forest.json",
                                                 forest_to_json(result.server.ensemble));
        }
        return;
    }

    if (model == "cox-local" || model == "cox-fedavg") {
        std::vector<SurvivalDataset> shards;
        if (fed.split == SplitKind::Uniform) {
            shards = uniform_split(train, fed.n_clients, fed.seed);
        } else {
            shards = label_skew_split(train, fed.n_clients, fed.alpha, fed.min_client_samples,
                                      fed.n_label_bins, fed.seed);
        }
        std::vector<CoxClient> clients;
        clients.reserve(shards.size());
        for (std::size_t k = 0; k < shards.size(); ++k) {
            auto [local_train, local_val] = local_split(
                shards[k], fed.local_val_fraction, derive_seed(fed.seed, streams::kLocalSplit, k));
            clients.push_back({std::move(local_train), std::move(local_val)});
        }

        if (model == "cox-fedavg") {
            const FedAvgResult result = fedavg_cox(clients, spec.cox, seed);
            std::vector<double> risks(test.size());
            std::vector<StepFunction> curves;
            curves.reserve(test.size());
            for (std::size_t i = 0; i < test.size(); ++i) {
                risks[i] = cox_predict_risk(result.model, test[i].features);
                curves.push_back(cox_survival_curve(result.model, test[i].features));
            }
            push(evaluate_predictions(risks, curves, test, ctx), "federated");
            if (spec.save_models) {
                outcome.model_artifacts.emplace_back(model + ".cox.json",
                                                     result.model.to_json());
            }
            return;
        }

        // cox-local: every client fits and predicts with its own data only.
        const std::size_t local_epochs = spec.cox.rounds * spec.cox.local_epochs;
        std::vector<MetricsReport> per_client;
        for (const auto& client : clients) {
            const Standardizer scaler = Standardizer::fit(client.train);
            const std::vector<double> beta = fit_cox_local(
                scaler.transform(client.train), spec.cox.learning_rate, local_epochs);
            const CoxModel cox_model =
                make_cox_model(beta, scaler, nelson_aalen(client.train));
            std::vector<double> risks(test.size());
            std::vector<StepFunction> curves;
            curves.reserve(test.size());
            for (std::size_t i = 0; i < test.size(); ++i) {
                risks[i] = cox_predict_risk(cox_model, test[i].features);
                curves.push_back(cox_survival_curve(cox_model, test[i].features));
            }
            per_client.push_back(evaluate_predictions(risks, curves, test, ctx));
        }
        push(mean_report(per_client), "local");
        return;
    }

    throw ConfigError("unknown model id \"" + model + "\"");
}

RunOutcome execute_run(const SurvivalDataset& data, const ExperimentSpec& spec,
                       std::uint64_t seed, unsigned n_jobs) {
    RunOutcome outcome;
    outcome.seed = seed;
    try {
        auto [train, test] = train_test_split(data, spec.test_fraction, seed);
        const EvalContext ctx = EvalContext::from_training(
            train, spec.metrics.grid_points, spec.metrics.lo_quantile, spec.metrics.hi_quantile);
        for (const auto& model : spec.models) {
            run_model(model, train, test, ctx, spec, seed, outcome, n_jobs);
        }
    } catch (const std::exception& e) {
        outcome.failed = true;
        outcome.error = e.what();
    }
    return outcome;
}

std::string format_scaled(double value) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.1f", value * 100.0);
    return buf;
}

}  // namespace

void ExperimentSpec::validate() const {
    if (repetitions < 1) throw ConfigError("ExperimentSpec: repetitions must be at least 1");
    if (models.empty()) throw ConfigError("ExperimentSpec: no models requested");
    for (const auto& m : models) {
        if (std::find(kKnownModels.begin(), kKnownModels.end(), m) == kKnownModels.end()) {
            throw ConfigError("ExperimentSpec: unknown model id \"" + m + "\"");
        }
    }
    if (!(test_fraction > 0.0 && test_fraction < 1.0)) {
        throw ConfigError("ExperimentSpec: test_fraction must lie in (0, 1)");
    }
}

ExperimentSpec ExperimentSpec::from_json_text(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        throw LoadError(std::string("experiment config is not valid JSON: ") + e.what());
    }

    ExperimentSpec spec;
    const auto& dataset = j.at("dataset");
    spec.dataset_path = dataset.at("path").get<std::string>();
    spec.schema_path = dataset.at("schema").get<std::string>();
    spec.models = j.at("models").get<std::vector<std::string>>();
    spec.repetitions = j.value("repetitions", spec.repetitions);
    spec.base_seed = j.value("base_seed", spec.base_seed);
    spec.test_fraction = j.value("test_fraction", spec.test_fraction);
    spec.output_dir = j.value("output_dir", spec.output_dir);
    spec.save_models = j.value("save_models", spec.save_models);

    if (j.contains("federation")) {
        const auto& f = j.at("federation");
        spec.federation.n_clients = f.value("n_clients", spec.federation.n_clients);
        if (f.contains("split")) {
            const auto split = f.at("split").get<std::string>();
            if (split == "uniform") {
                spec.federation.split = SplitKind::Uniform;
            } else if (split == "label_skew") {
                spec.federation.split = SplitKind::LabelSkew;
            } else {
                throw ConfigError("federation.split must be uniform or label_skew");
            }
        }
        spec.federation.alpha = f.value("alpha", spec.federation.alpha);
        spec.federation.min_client_samples =
            f.value("min_client_samples", spec.federation.min_client_samples);
        spec.federation.n_label_bins = f.value("n_label_bins", spec.federation.n_label_bins);
        spec.federation.n_server_trees =
            f.value("n_server_trees", spec.federation.n_server_trees);
        spec.federation.local_val_fraction =
            f.value("local_val_fraction", spec.federation.local_val_fraction);
        if (f.contains("sampling")) {
            const auto sampling = f.at("sampling").get<std::string>();
            if (sampling == "uniform") {
                spec.federation.sampling = SamplingStrategy::Uniform;
            } else if (sampling == "inverse_ibs") {
                spec.federation.sampling = SamplingStrategy::InverseIbs;
            } else {
                throw ConfigError("federation.sampling must be uniform or inverse_ibs");
            }
        }
        spec.federation.seed = f.value("seed", spec.federation.seed);
    }

    if (j.contains("forest")) {
        const auto& f = j.at("forest");
        spec.forest.n_trees = f.value("n_trees", spec.forest.n_trees);
        spec.forest.max_features = f.value("max_features", spec.forest.max_features);
        if (f.contains("max_depth") && !f.at("max_depth").is_null()) {
            spec.forest.max_depth = f.at("max_depth").get<std::size_t>();
        }
        spec.forest.min_samples_split =
            f.value("min_samples_split", spec.forest.min_samples_split);
        spec.forest.min_samples_leaf = f.value("min_samples_leaf", spec.forest.min_samples_leaf);
        spec.forest.min_events_leaf = f.value("min_events_leaf", spec.forest.min_events_leaf);
        spec.forest.seed = f.value("seed", spec.forest.seed);
    }

    if (j.contains("cox")) {
        const auto& c = j.at("cox");
        spec.cox.rounds = c.value("rounds", spec.cox.rounds);
        spec.cox.local_epochs = c.value("local_epochs", spec.cox.local_epochs);
        spec.cox.learning_rate = c.value("learning_rate", spec.cox.learning_rate);
        spec.cox.client_fraction = c.value("client_fraction", spec.cox.client_fraction);
    }

    if (j.contains("metrics")) {
        const auto& m = j.at("metrics");
        spec.metrics.grid_points = m.value("grid_points", spec.metrics.grid_points);
        spec.metrics.lo_quantile = m.value("lo_quantile", spec.metrics.lo_quantile);
        spec.metrics.hi_quantile = m.value("hi_quantile", spec.metrics.hi_quantile);
    }

    spec.validate();
    return spec;
}

ExperimentSpec ExperimentSpec::from_json_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw LoadError("cannot open config: " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return from_json_text(buf.str());
}

bool ExperimentSummary::all_succeeded() const {
    return std::none_of(runs.begin(), runs.end(), [](const RunOutcome& r) { return r.failed; });
}

std::string ExperimentSummary::reports_jsonl() const {
    std::string out;
    for (const auto& run : runs) {
        if (run.failed) {
            json j;
            j["seed"] = run.seed;
            j["error"] = run.error;
            out += j.dump();
            out += '\n';
            continue;
        }
        for (const auto& report : run.reports) {
            out += report.to_json();
            out += '\n';
        }
    }
    return out;
}

std::string ExperimentSummary::messages_jsonl() const {
    std::string out;
    for (const auto& run : runs) out += run.message_log_jsonl;
    return out;
}

std::string ExperimentSummary::reports_csv() const {
    std::string out = MetricsReport::csv_header() + "\n";
    for (const auto& run : runs) {
        for (const auto& report : run.reports) {
            out += report.to_csv_row();
            out += '\n';
        }
    }
    return out;
}

std::string ExperimentSummary::table_text() const {
    std::ostringstream out;
    out << "model        setting    split       runs  c_index (x100)   ibs (x100)\n";
    out << "-----------------------------------------------------------------------\n";
    for (const auto& row : aggregate) {
        char line[160];
        std::snprintf(line, sizeof(line), "%-12s %-10s %-11s %4zu  %5s +/- %-5s  %5s +/- %-5s\n",
                      row.model.c_str(), row.setting.c_str(), row.split_type.c_str(), row.n_runs,
                      format_scaled(row.c_index_mean).c_str(),
                      format_scaled(row.c_index_std).c_str(),
                      format_scaled(row.ibs_mean).c_str(), format_scaled(row.ibs_std).c_str());
        out << line;
    }
    std::size_t failures = 0;
    for (const auto& run : runs) failures += run.failed ? 1 : 0;
    if (failures > 0) {
        out << failures << " of " << runs.size() << " runs failed\n";
    }
    return out.str();
}

std::vector<AggregateRow> aggregate_reports(const std::vector<RunOutcome>& runs) {
    // Keyed by (model, setting, split_type), in first-seen order.
    std::vector<AggregateRow> rows;
    std::map<std::string, std::size_t> index;
    std::map<std::string, std::vector<std::pair<double, double>>> samples;

    for (const auto& run : runs) {
        if (run.failed) continue;
        for (const auto& report : run.reports) {
            const std::string key = report.model + '\x1f' + report.setting + '\x1f' +
                                    report.split_type;
            if (index.find(key) == index.end()) {
                index[key] = rows.size();
                rows.push_back({report.model, report.setting, report.split_type,
                                0.0, 0.0, 0.0, 0.0, 0});
            }
            samples[key].emplace_back(report.c_index, report.ibs);
        }
    }

    for (auto& [key, values] : samples) {
        AggregateRow& row = rows[index[key]];
        row.n_runs = values.size();
        const auto n = static_cast<double>(values.size());
        for (const auto& [c, ibs] : values) {
            row.c_index_mean += c;
            row.ibs_mean += ibs;
        }
        row.c_index_mean /= n;
        row.ibs_mean /= n;
        if (values.size() > 1) {
            double c_var = 0.0;
            double ibs_var = 0.0;
            for (const auto& [c, ibs] : values) {
                c_var += (c - row.c_index_mean) * (c - row.c_index_mean);
                ibs_var += (ibs - row.ibs_mean) * (ibs - row.ibs_mean);
            }
            row.c_index_std = std::sqrt(c_var / (n - 1.0));
            row.ibs_std = std::sqrt(ibs_var / (n - 1.0));
        }
    }
    return rows;
}

ExperimentSummary run_experiment_on(const SurvivalDataset& data, const ExperimentSpec& spec,
                                    unsigned n_jobs) {
    spec.validate();
    ExperimentSummary summary;
    summary.runs.resize(spec.repetitions);

    auto run_range = [&](std::size_t begin, std::size_t end, unsigned inner_jobs) {
        for (std::size_t r = begin; r < end; ++r) {
            summary.runs[r] = execute_run(data, spec, spec.base_seed + r, inner_jobs);
        }
    };

    if (n_jobs <= 1 || spec.repetitions < 2) {
        run_range(0, spec.repetitions, n_jobs);
    } else {
        const std::size_t workers = std::min<std::size_t>(n_jobs, spec.repetitions);
        std::vector<std::thread> pool;
        const std::size_t chunk = (spec.repetitions + workers - 1) / workers;
        for (std::size_t w = 0; w < workers; ++w) {
            const std::size_t begin = w * chunk;
            const std::size_t end = std::min<std::size_t>(spec.repetitions, begin + chunk);
            if (begin >= end) break;
            pool.emplace_back(run_range, begin, end, 1u);
        }
        for (auto& t : pool) t.join();
    }

    summary.aggregate = aggregate_reports(summary.runs);
    return summary;
}

ExperimentSummary run_experiment(const ExperimentSpec& spec, unsigned n_jobs) {
    const FeatureSchema schema = load_schema(spec.schema_path);
    const SurvivalDataset data = load_csv(spec.dataset_path, schema);
    ExperimentSummary summary = run_experiment_on(data, spec, n_jobs);

    if (!spec.output_dir.empty()) {
        std::filesystem::create_directories(spec.output_dir);
        const auto dir = std::filesystem::path(spec.output_dir);
        std::ofstream(dir / "reports.jsonl", std::ios::binary) << summary.reports_jsonl();
        std::ofstream(dir / "messages.jsonl", std::ios::binary) << summary.messages_jsonl();
        std::ofstream(dir / "reports.csv", std::ios::binary) << summary.reports_csv();
        std::ofstream(dir / "summary.txt", std::ios::binary) << summary.table_text();
        if (spec.save_models && !summary.runs.empty() && !summary.runs.back().failed) {
            std::filesystem::create_directories(dir / "models");
            for (const auto& [name, text] : summary.runs.back().model_artifacts) {
                std::ofstream(dir / "models" / name, std::ios::binary) << text << "\n";
            }
        }
    }
    return summary;
}

}  // namespace fedsurf
