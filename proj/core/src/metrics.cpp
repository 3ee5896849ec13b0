#include "fedsurf/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include <json.hpp>

#include "fedsurf/errors.hpp"
#include "fedsurf/estimators.hpp"

namespace fedsurf {

EvalGrid::EvalGrid(std::vector<double> points) : points_(std::move(points)) {
    if (points_.empty()) throw ArgumentError("EvalGrid: grid is empty");
    if (points_.size() < 2) throw ArgumentError("EvalGrid: grid needs at least two points");
    for (std::size_t i = 0; i + 1 < points_.size(); ++i) {
        if (!(points_[i] < points_[i + 1])) {
            throw ArgumentError("EvalGrid: points must be strictly increasing");
        }
    }
}

EvalGrid EvalGrid::from_training(const SurvivalDataset& train, std::size_t n_points,
                                 double lo_quantile, double hi_quantile) {
    if (n_points < 2) throw ArgumentError("EvalGrid: n_points must be at least 2");
    std::vector<double> event_times;
    for (const auto& r : train.records()) {
        if (r.event) event_times.push_back(r.time);
    }
    if (event_times.size() < 2) {
        throw ArgumentError("EvalGrid: training split has fewer than two events");
    }
    std::sort(event_times.begin(), event_times.end());

    const double max_event = event_times.back();
    double lo = sorted_quantile(event_times, lo_quantile);
    double hi = sorted_quantile(event_times, hi_quantile);
    if (hi >= max_event) {
        // Keep the grid strictly below the largest event time.
        auto it = std::lower_bound(event_times.begin(), event_times.end(), max_event);
        if (it == event_times.begin()) {
            throw ArgumentError("EvalGrid: all training events are tied at one time");
        }
        hi = *(it - 1);
    }
    if (!(lo < hi)) {
        lo = event_times.front();
        if (!(lo < hi)) throw ArgumentError("EvalGrid: degenerate event-time range");
    }

    std::vector<double> points(n_points);
    const double step = (hi - lo) / static_cast<double>(n_points - 1);
    for (std::size_t i = 0; i < n_points; ++i) {
        points[i] = lo + static_cast<double>(i) * step;
    }
    points.back() = hi;
    return EvalGrid(std::move(points));
}

std::string MetricsReport::to_json() const {
    nlohmann::json j;
    j["model"] = model;
    j["setting"] = setting;
    j["split_type"] = split_type;
    j["seed"] = seed;
    j["c_index"] = c_index;
    j["ibs"] = ibs;
    j["brier_times"] = brier_times;
    j["brier_values"] = brier_values;
    return j.dump();
}

std::string MetricsReport::csv_header() {
    return "model,setting,split_type,seed,c_index,ibs";
}

std::string MetricsReport::to_csv_row() const {
    std::ostringstream out;
    out << model << ',' << setting << ',' << split_type << ',' << seed << ',';
    out.precision(17);
    out << c_index << ',' << ibs;
    return out.str();
}

StepFunction censoring_survival(const SurvivalDataset& train) {
    if (train.empty()) throw ArgumentError("censoring_survival: dataset is empty");
    std::vector<SurvivalRecord> flipped = train.records();
    for (auto& r : flipped) r.event = !r.event;
    return kaplan_meier(SurvivalDataset(std::move(flipped), train.schema()));
}

double brier_score(const StepFunction& censoring, const SurvivalDataset& test,
                   const std::vector<double>& surv_at_t, double t) {
    if (test.empty()) throw ArgumentError("brier_score: test set is empty");
    if (surv_at_t.size() != test.size()) {
        throw ArgumentError("brier_score: one prediction per test record required");
    }

    double total = 0.0;
    for (std::size_t i = 0; i < test.size(); ++i) {
        const auto& rec = test[i];
        const double s = surv_at_t[i];
        if (rec.time <= t && rec.event) {
            const double g = censoring.left_limit(rec.time);
            if (!(g > 0.0)) {
                throw EvalError("brier_score: censoring weight is zero at t=" +
                                std::to_string(t));
            }
            total += s * s / g;
        } else if (rec.time > t) {
            const double g = censoring(t);
            if (!(g > 0.0)) {
                throw EvalError("brier_score: censoring weight is zero at t=" +
                                std::to_string(t));
            }
            const double err = 1.0 - s;
            total += err * err / g;
        }
        // censored at or before t: contributes 0
    }
    return total / static_cast<double>(test.size());
}

namespace {

std::vector<double> brier_curve(const StepFunction& censoring, const SurvivalDataset& test,
                                const std::vector<StepFunction>& surv_curves,
                                const EvalGrid& grid) {
    if (surv_curves.size() != test.size()) {
        throw ArgumentError("integrated_brier_score: one curve per test record required");
    }
    const auto& points = grid.points();
    std::vector<double> brier(points.size());
    std::vector<double> surv_at_t(test.size());
    for (std::size_t k = 0; k < points.size(); ++k) {
        for (std::size_t i = 0; i < test.size(); ++i) {
            surv_at_t[i] = surv_curves[i](points[k]);
        }
        brier[k] = brier_score(censoring, test, surv_at_t, points[k]);
    }
    return brier;
}

double trapezoid_normalized(const std::vector<double>& points, const std::vector<double>& values) {
    double integral = 0.0;
    for (std::size_t k = 0; k + 1 < points.size(); ++k) {
        integral += 0.5 * (values[k] + values[k + 1]) * (points[k + 1] - points[k]);
    }
    return integral / (points.back() - points.front());
}

}  // namespace

double integrated_brier_score(const StepFunction& censoring, const SurvivalDataset& test,
                              const std::vector<StepFunction>& surv_curves,
                              const EvalGrid& grid) {
    return trapezoid_normalized(grid.points(),
                                brier_curve(censoring, test, surv_curves, grid));
}

double concordance_index_ipcw(const StepFunction& censoring, const SurvivalDataset& test,
                              const std::vector<double>& risks, double tau) {
    if (risks.size() != test.size()) {
        throw ArgumentError("concordance_index_ipcw: one risk per test record required");
    }

    double numerator = 0.0;
    double denominator = 0.0;
    for (std::size_t i = 0; i < test.size(); ++i) {
        const auto& ri = test[i];
        if (!ri.event || !(ri.time < tau)) continue;
        const double g = censoring.left_limit(ri.time);
        if (!(g > 0.0)) {
            throw EvalError("concordance_index_ipcw: censoring weight is zero at t=" +
                            std::to_string(ri.time));
        }
        const double w = 1.0 / (g * g);
        for (std::size_t j = 0; j < test.size(); ++j) {
            if (!(ri.time < test[j].time)) continue;
            denominator += w;
            if (risks[i] > risks[j]) {
                numerator += w;
            } else if (risks[i] == risks[j]) {
                numerator += 0.5 * w;
            }
        }
    }
    if (denominator == 0.0) {
        throw EvalError("concordance_index_ipcw: no comparable pairs");
    }
    return numerator / denominator;
}

double per_tree_ibs(const SurvivalTree& tree, const SurvivalDataset& validation,
                    const StepFunction& censoring, const EvalGrid& grid) {
    if (validation.empty()) throw ArgumentError("per_tree_ibs: validation split is empty");
    std::vector<StepFunction> curves;
    curves.reserve(validation.size());
    for (const auto& rec : validation.records()) {
        curves.push_back(chf_to_survival(tree.leaf_chf_function(rec.features)));
    }
    const double ibs = integrated_brier_score(censoring, validation, curves, grid);
    return std::max(ibs, 1e-6);
}

EvalContext EvalContext::from_training(const SurvivalDataset& train, std::size_t n_points,
                                       double lo_quantile, double hi_quantile) {
    EvalGrid grid = EvalGrid::from_training(train, n_points, lo_quantile, hi_quantile);
    const double tau = grid.max();
    return EvalContext{censoring_survival(train), std::move(grid), tau};
}

MetricsReport evaluate_predictions(const std::vector<double>& risks,
                                   const std::vector<StepFunction>& surv_curves,
                                   const SurvivalDataset& test, const EvalContext& ctx) {
    MetricsReport report;
    report.c_index = concordance_index_ipcw(ctx.censoring, test, risks, ctx.tau);
    report.brier_times = ctx.grid.points();
    report.brier_values = brier_curve(ctx.censoring, test, surv_curves, ctx.grid);
    report.ibs = trapezoid_normalized(report.brier_times, report.brier_values);
    return report;
}

MetricsReport evaluate_forest(const Forest& forest, const SurvivalDataset& test,
                              const EvalContext& ctx) {
    std::vector<double> risks(test.size());
    std::vector<StepFunction> curves;
    curves.reserve(test.size());
    for (std::size_t i = 0; i < test.size(); ++i) {
        const StepFunction chf = predict_chf(forest, test[i].features);
        risks[i] = 0.0;
        for (double v : chf.values()) risks[i] += v;
        curves.push_back(chf_to_survival(chf));
    }
    return evaluate_predictions(risks, curves, test, ctx);
}

}  // namespace fedsurf
