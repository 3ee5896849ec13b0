#include "fedsurf/cox.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <numeric>
#include <sstream>

#include <json.hpp>

#include "fedsurf/errors.hpp"
#include "fedsurf/rng.hpp"

namespace fedsurf {

namespace {

void require_numeric(const SurvivalDataset& data, const char* op) {
    for (const auto& r : data.records()) {
        for (double x : r.features) {
            if (is_missing(x)) {
                throw ArgumentError(std::string(op) +
                                    ": data contains missing values; standardize first");
            }
        }
    }
}

double dot(std::span<const double> a, std::span<const double> b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

// Indices sorted by time descending (stable on ties) so one sweep can grow
// the risk set and score events per distinct time (the Breslow convention:
// tied events share the full risk set).
std::vector<std::size_t> descending_time_order(const SurvivalDataset& data) {
    std::vector<std::size_t> order(data.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return data[a].time > data[b].time;
    });
    return order;
}

// Unweighted Harrell's C used for round selection during FedAvg; returns
// -1 when no pairs are comparable.
double harrell_c(const SurvivalDataset& data, const std::vector<double>& risks) {
    double num = 0.0;
    double den = 0.0;
    for (std::size_t i = 0; i < data.size(); ++i) {
        if (!data[i].event) continue;
        for (std::size_t j = 0; j < data.size(); ++j) {
            if (!(data[i].time < data[j].time)) continue;
            den += 1.0;
            if (risks[i] > risks[j]) {
                num += 1.0;
            } else if (risks[i] == risks[j]) {
                num += 0.5;
            }
        }
    }
    return den > 0.0 ? num / den : -1.0;
}

}  // namespace

void FedAvgConfig::validate() const {
    if (rounds == 0 || local_epochs == 0) {
        throw ArgumentError("FedAvgConfig: rounds and local_epochs must be positive");
    }
    if (!(learning_rate > 0.0)) {
        throw ArgumentError("FedAvgConfig: learning_rate must be positive");
    }
    if (!(client_fraction > 0.0 && client_fraction <= 1.0)) {
        throw ArgumentError("FedAvgConfig: client_fraction must lie in (0, 1]");
    }
}

Standardizer Standardizer::fit(const SurvivalDataset& data) {
    return fit_pooled({data});
}

Standardizer Standardizer::fit_pooled(const std::vector<SurvivalDataset>& parts) {
    if (parts.empty()) throw ArgumentError("Standardizer: no data");
    const std::size_t d = parts.front().feature_count();
    std::vector<double> count(d, 0.0);
    std::vector<double> sum(d, 0.0);
    std::vector<double> sumsq(d, 0.0);
    for (const auto& part : parts) {
        if (part.feature_count() != d) {
            throw ArgumentError("Standardizer: feature counts differ across parts");
        }
        for (const auto& r : part.records()) {
            for (std::size_t j = 0; j < d; ++j) {
                const double x = r.features[j];
                if (is_missing(x)) continue;
                count[j] += 1.0;
                sum[j] += x;
                sumsq[j] += x * x;
            }
        }
    }

    Standardizer s;
    s.mean.resize(d);
    s.scale.resize(d);
    for (std::size_t j = 0; j < d; ++j) {
        if (count[j] == 0.0) {
            s.mean[j] = 0.0;
            s.scale[j] = 1.0;
            continue;
        }
        s.mean[j] = sum[j] / count[j];
        const double var = std::max(0.0, sumsq[j] / count[j] - s.mean[j] * s.mean[j]);
        const double sd = std::sqrt(var);
        s.scale[j] = sd > 0.0 ? sd : 1.0;
    }
    return s;
}

std::vector<double> Standardizer::transform(std::span<const double> x) const {
    if (x.size() != mean.size()) {
        throw ArgumentError("Standardizer: feature vector length mismatch");
    }
    std::vector<double> out(x.size());
    for (std::size_t j = 0; j < x.size(); ++j) {
        out[j] = is_missing(x[j]) ? 0.0 : (x[j] - mean[j]) / scale[j];
    }
    return out;
}

SurvivalDataset Standardizer::transform(const SurvivalDataset& data) const {
    std::vector<SurvivalRecord> rows = data.records();
    for (auto& r : rows) r.features = transform(r.features);
    return SurvivalDataset(std::move(rows), data.schema());
}

double cox_neg_partial_loglik(std::span<const double> beta, const SurvivalDataset& data) {
    if (data.event_count() == 0) {
        throw ArgumentError("cox_neg_partial_loglik: dataset has no events");
    }
    require_numeric(data, "cox_neg_partial_loglik");

    std::vector<double> lp(data.size());
    double max_lp = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < data.size(); ++i) {
        lp[i] = dot(beta, data[i].features);
        max_lp = std::max(max_lp, lp[i]);
    }

    const auto order = descending_time_order(data);
    double loss = 0.0;
    double risk_sum = 0.0;
    std::size_t i = 0;
    while (i < order.size()) {
        const double t = data[order[i]].time;
        std::size_t j = i;
        while (j < order.size() && data[order[j]].time == t) {
            risk_sum += std::exp(lp[order[j]] - max_lp);
            ++j;
        }
        for (std::size_t k = i; k < j; ++k) {
            if (data[order[k]].event) {
                loss -= lp[order[k]] - (max_lp + std::log(risk_sum));
            }
        }
        i = j;
    }
    return loss;
}

std::vector<double> cox_gradient(std::span<const double> beta, const SurvivalDataset& data) {
    if (data.event_count() == 0) {
        throw ArgumentError("cox_gradient: dataset has no events");
    }
    require_numeric(data, "cox_gradient");
    const std::size_t d = beta.size();

    std::vector<double> lp(data.size());
    double max_lp = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < data.size(); ++i) {
        lp[i] = dot(beta, data[i].features);
        max_lp = std::max(max_lp, lp[i]);
    }

    const auto order = descending_time_order(data);
    std::vector<double> grad(d, 0.0);
    std::vector<double> weighted_x(d, 0.0);  // sum of x_l * exp(lp_l - m) over the risk set
    double risk_sum = 0.0;
    std::size_t i = 0;
    while (i < order.size()) {
        const double t = data[order[i]].time;
        std::size_t j = i;
        while (j < order.size() && data[order[j]].time == t) {
            const double w = std::exp(lp[order[j]] - max_lp);
            risk_sum += w;
            const auto& x = data[order[j]].features;
            for (std::size_t f = 0; f < d; ++f) weighted_x[f] += w * x[f];
            ++j;
        }
        for (std::size_t k = i; k < j; ++k) {
            if (data[order[k]].event) {
                const auto& x = data[order[k]].features;
                for (std::size_t f = 0; f < d; ++f) {
                    grad[f] += weighted_x[f] / risk_sum - x[f];
                }
            }
        }
        i = j;
    }
    return grad;
}

std::vector<double> fit_cox_local(const SurvivalDataset& data, double learning_rate,
                                  std::size_t epochs) {
    if (data.event_count() == 0) {
        throw ArgumentError("fit_cox_local: dataset has no events");
    }
    if (!(learning_rate > 0.0)) {
        throw ArgumentError("fit_cox_local: learning_rate must be positive");
    }
    const std::size_t d = data.feature_count();
    std::vector<double> beta(d, 0.0);
    if (epochs == 0 || d == 0) return beta;

    double loss = cox_neg_partial_loglik(beta, data);
    if (!std::isfinite(loss)) {
        throw Error("fit_cox_local: loss is not finite; reduce learning_rate");
    }

    std::vector<double> trial(d);
    for (std::size_t epoch = 0; epoch < epochs; ++epoch) {
        const std::vector<double> grad = cox_gradient(beta, data);
        double step = learning_rate;
        bool accepted = false;
        while (step > 1e-14) {
            for (std::size_t f = 0; f < d; ++f) trial[f] = beta[f] - step * grad[f];
            const double trial_loss = cox_neg_partial_loglik(trial, data);
            if (std::isfinite(trial_loss) && trial_loss <= loss) {
                beta = trial;
                loss = trial_loss;
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        if (!accepted) break;  // stationary within backtracking resolution
    }
    return beta;
}

StepFunction shared_baseline_hazard(const std::vector<SurvivalDataset>& client_data) {
    if (client_data.empty()) throw ArgumentError("shared_baseline_hazard: no clients");

    // Client summaries: per distinct time, (event count, observation count).
    // The map merge reproduces the pooled risk sets exactly.
    std::map<double, std::pair<std::size_t, std::size_t>> merged;
    std::size_t total = 0;
    for (const auto& data : client_data) {
        if (data.empty()) throw ArgumentError("shared_baseline_hazard: empty client summary");
        total += data.size();
        for (const auto& r : data.records()) {
            auto& cell = merged[r.time];
            cell.first += r.event ? 1 : 0;
            cell.second += 1;
        }
    }

    std::vector<double> times;
    std::vector<double> values;
    double hazard = 0.0;
    std::size_t at_risk = total;
    for (const auto& [time, counts] : merged) {
        const auto [events, observed] = counts;
        if (events > 0) {
            hazard += static_cast<double>(events) / static_cast<double>(at_risk);
            times.push_back(time);
            values.push_back(hazard);
        }
        at_risk -= observed;
    }
    return StepFunction(std::move(times), std::move(values), 0.0);
}

FedAvgResult fedavg_cox(const std::vector<CoxClient>& clients, const FedAvgConfig& config,
                        std::uint64_t seed) {
    if (clients.empty()) throw ArgumentError("fedavg_cox: no clients");
    config.validate();
    for (const auto& client : clients) {
        if (client.train.event_count() == 0) {
            throw ArgumentError("fedavg_cox: every client needs at least one event");
        }
    }
    const std::size_t d = clients.front().train.feature_count();

    // Pooled standardization statistics, exchanged once before training.
    std::vector<SurvivalDataset> raw_train;
    for (const auto& client : clients) raw_train.push_back(client.train);
    const Standardizer scaler = Standardizer::fit_pooled(raw_train);

    std::vector<SurvivalDataset> train;
    std::vector<SurvivalDataset> validation;
    for (const auto& client : clients) {
        train.push_back(scaler.transform(client.train));
        validation.push_back(scaler.transform(client.validation));
    }

    std::vector<double> sizes(clients.size());
    double total_size = 0.0;
    for (std::size_t k = 0; k < clients.size(); ++k) {
        sizes[k] = static_cast<double>(clients[k].dataset_size());
        total_size += sizes[k];
    }

    Rng fraction_rng = Rng(seed).derive(streams::kClientFraction);
    const auto n_selected = std::max<std::size_t>(
        1, static_cast<std::size_t>(
               std::llround(config.client_fraction * static_cast<double>(clients.size()))));

    std::vector<double> beta(d, 0.0);
    std::vector<double> best_beta = beta;
    double best_c = -2.0;
    std::size_t best_round = 0;

    auto validation_c = [&](const std::vector<double>& b) {
        double num = 0.0;
        double den = 0.0;
        for (std::size_t k = 0; k < clients.size(); ++k) {
            const auto& val = validation[k];
            if (val.empty()) continue;
            std::vector<double> risks(val.size());
            for (std::size_t i = 0; i < val.size(); ++i) risks[i] = dot(b, val[i].features);
            const double c = harrell_c(val, risks);
            if (c < 0.0) continue;
            const auto w = static_cast<double>(val.size());
            num += w * c;
            den += w;
        }
        return den > 0.0 ? num / den : -1.0;
    };

    for (std::size_t round = 0; round < config.rounds; ++round) {
        std::vector<std::size_t> selected(clients.size());
        std::iota(selected.begin(), selected.end(), std::size_t{0});
        if (n_selected < clients.size()) {
            fraction_rng.shuffle(selected);
            selected.resize(n_selected);
            std::sort(selected.begin(), selected.end());
        }

        std::vector<std::vector<double>> updates;
        std::vector<double> update_sizes;
        for (std::size_t k : selected) {
            std::vector<double> local = beta;
            for (std::size_t epoch = 0; epoch < config.local_epochs; ++epoch) {
                const std::vector<double> grad = cox_gradient(local, train[k]);
                double step = config.learning_rate;
                const double before = cox_neg_partial_loglik(local, train[k]);
                std::vector<double> trial(d);
                while (step > 1e-14) {
                    for (std::size_t f = 0; f < d; ++f) trial[f] = local[f] - step * grad[f];
                    const double after = cox_neg_partial_loglik(trial, train[k]);
                    if (std::isfinite(after) && after <= before) {
                        local = trial;
                        break;
                    }
                    step *= 0.5;
                }
            }
            updates.push_back(std::move(local));
            update_sizes.push_back(sizes[k]);
        }

        const double selected_total =
            std::accumulate(update_sizes.begin(), update_sizes.end(), 0.0);
        for (std::size_t f = 0; f < d; ++f) {
            double acc = 0.0;
            for (std::size_t u = 0; u < updates.size(); ++u) {
                acc += update_sizes[u] * updates[u][f];
            }
            beta[f] = acc / selected_total;
        }

        const double c = validation_c(beta);
        if (c > best_c) {
            best_c = c;
            best_beta = beta;
            best_round = round + 1;
        }
    }

    FedAvgResult result;
    result.best_beta = best_beta;
    result.final_beta = beta;
    result.best_round = best_round;
    result.best_validation_c = best_c;
    result.model = make_cox_model(best_beta, scaler, shared_baseline_hazard(raw_train));
    return result;
}

double cox_predict_risk(const CoxModel& model, std::span<const double> x) {
    if (x.size() != model.beta.size()) {
        throw ArgumentError("cox_predict_risk: feature vector length mismatch");
    }
    double s = 0.0;
    for (std::size_t j = 0; j < x.size(); ++j) {
        double v = x[j];
        if (is_missing(v)) {
            if (j >= model.feature_means.size()) {
                throw EvalError("cox_predict_risk: missing value and no imputation mean");
            }
            v = model.feature_means[j];
        }
        s += model.beta[j] * v;
    }
    return s;
}

StepFunction cox_survival_curve(const CoxModel& model, std::span<const double> x) {
    const double risk = std::exp(cox_predict_risk(model, x));
    std::vector<double> values(model.baseline_cum_hazard.size());
    for (std::size_t i = 0; i < values.size(); ++i) {
        values[i] = std::exp(-model.baseline_cum_hazard.values()[i] * risk);
    }
    return StepFunction(model.baseline_cum_hazard.times(), std::move(values), 1.0);
}

CoxModel make_cox_model(const std::vector<double>& beta_standardized,
                        const Standardizer& scaler, const StepFunction& baseline) {
    if (beta_standardized.size() != scaler.mean.size()) {
        throw ArgumentError("make_cox_model: beta and scaler dimensions differ");
    }
    CoxModel model;
    model.beta.resize(beta_standardized.size());
    double offset = 0.0;
    for (std::size_t j = 0; j < beta_standardized.size(); ++j) {
        model.beta[j] = beta_standardized[j] / scaler.scale[j];
        offset -= beta_standardized[j] * scaler.mean[j] / scaler.scale[j];
    }
    // exp(<beta_std, z>) = exp(offset) * exp(<beta_raw, x>); the constant is
    // absorbed into the baseline so prediction stays (beta, baseline).
    const double factor = std::exp(offset);
    std::vector<double> values(baseline.size());
    for (std::size_t i = 0; i < values.size(); ++i) {
        values[i] = baseline.values()[i] * factor;
    }
    model.baseline_cum_hazard = StepFunction(baseline.times(), std::move(values), 0.0);
    model.feature_means = scaler.mean;
    return model;
}

std::string CoxModel::to_json() const {
    nlohmann::json j;
    j["format"] = "fedsurf-cox";
    j["version"] = 1;
    j["beta"] = beta;
    j["baseline_times"] = baseline_cum_hazard.times();
    j["baseline_values"] = baseline_cum_hazard.values();
    j["feature_means"] = feature_means;
    return j.dump();
}

CoxModel CoxModel::from_json(const std::string& text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        throw LoadError(std::string("invalid cox model JSON: ") + e.what());
    }
    if (j.value("format", "") != "fedsurf-cox") throw LoadError("not a fedsurf cox model file");
    CoxModel model;
    model.beta = j.at("beta").get<std::vector<double>>();
    model.baseline_cum_hazard =
        StepFunction(j.at("baseline_times").get<std::vector<double>>(),
                     j.at("baseline_values").get<std::vector<double>>(), 0.0);
    if (j.contains("feature_means")) {
        model.feature_means = j.at("feature_means").get<std::vector<double>>();
    }
    return model;
}

void save_cox_model(const CoxModel& model, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw LoadError("cannot write file: " + path);
    out << model.to_json() << '\n';
}

CoxModel load_cox_model(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw LoadError("cannot open file: " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return CoxModel::from_json(buf.str());
}

}  // namespace fedsurf
