#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "fedsurf/dataset.hpp"
#include "fedsurf/step_function.hpp"

namespace fedsurf {

// Risk-set bookkeeping shared by Kaplan-Meier, Nelson-Aalen and the
// log-rank split statistic: for each distinct time, how many events and
// how many subjects at risk. Ties between an event and a censoring at the
// same time keep the censored subject in the risk set (censoring happens
// just after the event).
struct EventTableRow {
    double time = 0.0;
    std::size_t events = 0;     // d_j
    std::size_t observed = 0;   // records with exactly this time (events + censorings)
    std::size_t at_risk = 0;    // n_j = #{ t_i >= time }
};

std::vector<EventTableRow> event_table(const SurvivalDataset& data);

// Product-limit estimator of S(t); jumps only at event times.
StepFunction kaplan_meier(const SurvivalDataset& data);

// Cumulative hazard estimator sum of d_j / n_j; jumps only at event times.
StepFunction nelson_aalen(const SurvivalDataset& data);

// Deterministic shuffle split: |test| = round(test_fraction * N).
std::pair<SurvivalDataset, SurvivalDataset> train_test_split(const SurvivalDataset& data,
                                                             double test_fraction,
                                                             std::uint64_t seed);

// Linear-interpolation quantile of a sorted sample, p in [0, 1].
double sorted_quantile(const std::vector<double>& sorted, double p);

}  // namespace fedsurf
