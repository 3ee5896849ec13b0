#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "fedsurf/dataset.hpp"
#include "fedsurf/forest.hpp"
#include "fedsurf/step_function.hpp"

namespace fedsurf {

// Time grid the Brier score is integrated over. Points must be strictly
// increasing and stay below the largest observed event time of the
// reference data so the censoring estimate stays away from 0.
class EvalGrid {
public:
    explicit EvalGrid(std::vector<double> points);

    // Default grid: n_points equally spaced between the lo/hi quantiles of
    // the training split's observed event times.
    static EvalGrid from_training(const SurvivalDataset& train, std::size_t n_points = 100,
                                  double lo_quantile = 0.05, double hi_quantile = 0.95);

    const std::vector<double>& points() const { return points_; }
    double min() const { return points_.front(); }
    double max() const { return points_.back(); }

private:
    std::vector<double> points_;
};

struct MetricsReport {
    double c_index = 0.0;
    double ibs = 0.0;
    std::vector<double> brier_times;
    std::vector<double> brier_values;
    // metadata
    std::string model;
    std::string setting;     // "local" | "federated"
    std::string split_type;  // "uniform" | "label_skew" | "none"
    std::uint64_t seed = 0;

    // Stored values are unscaled; presentation multiplies by 100.
    std::string to_json() const;
    static std::string csv_header();
    std::string to_csv_row() const;
};

// Kaplan-Meier estimate of the censoring distribution G(t): the event
// indicator is flipped so censorings become the events.
StepFunction censoring_survival(const SurvivalDataset& train);

// IPCW Brier score at time t. surv_at_t holds the predicted S(t | x_i) for
// each test record.
double brier_score(const StepFunction& censoring, const SurvivalDataset& test,
                   const std::vector<double>& surv_at_t, double t);

// Trapezoidal integral of the Brier score over the grid, normalized by the
// grid span.
double integrated_brier_score(const StepFunction& censoring, const SurvivalDataset& test,
                              const std::vector<StepFunction>& surv_curves, const EvalGrid& grid);

// Uno's IPCW concordance index with weights G(t_i-)^-2 over ordered pairs
// (event i, later j) below the horizon tau. Risk ties count 1/2; time ties
// are not comparable.
double concordance_index_ipcw(const StepFunction& censoring, const SurvivalDataset& test,
                              const std::vector<double>& risks, double tau);

// IBS of one tree's survival curves on a validation split, floored at 1e-6
// so inverse-IBS weighting stays finite.
double per_tree_ibs(const SurvivalTree& tree, const SurvivalDataset& validation,
                    const StepFunction& censoring, const EvalGrid& grid);

// Everything needed to score predictions on a test set; built once per run
// from the training split.
struct EvalContext {
    StepFunction censoring;
    EvalGrid grid;
    double tau;

    static EvalContext from_training(const SurvivalDataset& train, std::size_t n_points = 100,
                                     double lo_quantile = 0.05, double hi_quantile = 0.95);
};

// Scores per-record risks and survival curves; metadata fields are left to
// the caller.
MetricsReport evaluate_predictions(const std::vector<double>& risks,
                                   const std::vector<StepFunction>& surv_curves,
                                   const SurvivalDataset& test, const EvalContext& ctx);

MetricsReport evaluate_forest(const Forest& forest, const SurvivalDataset& test,
                              const EvalContext& ctx);

}  // namespace fedsurf
