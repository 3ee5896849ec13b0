#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "fedsurf/dataset.hpp"
#include "fedsurf/step_function.hpp"

namespace fedsurf {

// Proportional-hazards model in raw feature space. The standardization
// applied during fitting is folded in: beta is rescaled and the constant
// offset is absorbed into the baseline values, so prediction needs only
// (beta, baseline). feature_means impute missing values at predict time.
struct CoxModel {
    std::vector<double> beta;
    StepFunction baseline_cum_hazard;
    std::vector<double> feature_means;

    std::string to_json() const;
    static CoxModel from_json(const std::string& text);
};

void save_cox_model(const CoxModel& model, const std::string& path);
CoxModel load_cox_model(const std::string& path);

struct FedAvgConfig {
    std::size_t rounds = 500;
    std::size_t local_epochs = 1;
    double learning_rate = 0.01;
    double client_fraction = 1.0;

    void validate() const;
};

// Per-feature zero-mean unit-variance transform; statistics ignore missing
// cells and missing values map to 0 (the mean) after transforming.
struct Standardizer {
    std::vector<double> mean;
    std::vector<double> scale;

    static Standardizer fit(const SurvivalDataset& data);
    static Standardizer fit_pooled(const std::vector<SurvivalDataset>& parts);

    std::vector<double> transform(std::span<const double> x) const;
    SurvivalDataset transform(const SurvivalDataset& data) const;
};

// Negative Cox partial log-likelihood, Breslow handling for tied event
// times. Requires at least one event and fully numeric features.
double cox_neg_partial_loglik(std::span<const double> beta, const SurvivalDataset& data);

// Analytic gradient of cox_neg_partial_loglik.
std::vector<double> cox_gradient(std::span<const double> beta, const SurvivalDataset& data);

// Full-batch gradient descent from beta = 0 with backtracking halving, so
// the loss never increases across epochs. Expects standardized data.
std::vector<double> fit_cox_local(const SurvivalDataset& data, double learning_rate,
                                  std::size_t epochs);

// One client's raw shard, already partitioned locally.
struct CoxClient {
    SurvivalDataset train;
    SurvivalDataset validation;

    std::size_t dataset_size() const { return train.size() + validation.size(); }
};

struct FedAvgResult {
    CoxModel model;                 // best-validation parameters + shared baseline
    std::vector<double> best_beta;  // standardized space
    std::vector<double> final_beta; // standardized space, after the last round
    std::size_t best_round = 0;
    double best_validation_c = 0.0;
};

// FedAvg over Cox clients: broadcast beta, local_epochs gradient epochs per
// selected client, dataset-size-weighted aggregation; keeps the round with
// the best validation C-index. Standardization statistics are pooled once
// before training and the shared Nelson-Aalen baseline is attached.
FedAvgResult fedavg_cox(const std::vector<CoxClient>& clients, const FedAvgConfig& config,
                        std::uint64_t seed);

// Pooled Nelson-Aalen baseline from per-client aggregate summaries
// (distinct times with event/observation counts); exactly equal to
// nelson_aalen on the concatenated data.
StepFunction shared_baseline_hazard(const std::vector<SurvivalDataset>& client_data);

// Linear predictor <beta, x>; monotone equivalent of the exponential risk.
double cox_predict_risk(const CoxModel& model, std::span<const double> x);

// S(t | x) = exp(-H0(t) * exp(<beta, x>)) on the baseline grid.
StepFunction cox_survival_curve(const CoxModel& model, std::span<const double> x);

// Folds a standardized-space coefficient vector into a raw-space model.
CoxModel make_cox_model(const std::vector<double>& beta_standardized,
                        const Standardizer& scaler, const StepFunction& baseline);

}  // namespace fedsurf
