#include "fedsurf/estimators.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "fedsurf/errors.hpp"
#include "fedsurf/rng.hpp"

namespace fedsurf {

std::vector<EventTableRow> event_table(const SurvivalDataset& data) {
    if (data.empty()) throw ArgumentError("event_table: dataset is empty");

    std::vector<std::pair<double, bool>> obs;
    obs.reserve(data.size());
    for (const auto& r : data.records()) obs.emplace_back(r.time, r.event);
    std::sort(obs.begin(), obs.end());

    std::vector<EventTableRow> table;
    std::size_t at_risk = obs.size();
    std::size_t i = 0;
    while (i < obs.size()) {
        const double t = obs[i].first;
        EventTableRow row;
        row.time = t;
        row.at_risk = at_risk;
        while (i < obs.size() && obs[i].first == t) {
            row.observed += 1;
            row.events += obs[i].second ? 1 : 0;
            ++i;
        }
        at_risk -= row.observed;
        table.push_back(row);
    }
    return table;
}

StepFunction kaplan_meier(const SurvivalDataset& data) {
    const auto table = event_table(data);
    std::vector<double> times;
    std::vector<double> values;
    double surv = 1.0;
    for (const auto& row : table) {
        if (row.events == 0) continue;
        surv *= 1.0 - static_cast<double>(row.events) / static_cast<double>(row.at_risk);
        times.push_back(row.time);
        values.push_back(surv);
    }
    return StepFunction(std::move(times), std::move(values), 1.0);
}

StepFunction nelson_aalen(const SurvivalDataset& data) {
    const auto table = event_table(data);
    std::vector<double> times;
    std::vector<double> values;
    double hazard = 0.0;
    for (const auto& row : table) {
        if (row.events == 0) continue;
        hazard += static_cast<double>(row.events) / static_cast<double>(row.at_risk);
        times.push_back(row.time);
        values.push_back(hazard);
    }
    return StepFunction(std::move(times), std::move(values), 0.0);
}

std::pair<SurvivalDataset, SurvivalDataset> train_test_split(const SurvivalDataset& data,
                                                             double test_fraction,
                                                             std::uint64_t seed) {
    if (data.empty()) throw ArgumentError("train_test_split: dataset is empty");
    if (!(test_fraction > 0.0 && test_fraction < 1.0)) {
        throw ArgumentError("train_test_split: test_fraction must lie in (0, 1)");
    }

    std::vector<std::size_t> order(data.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng rng = Rng(seed).derive(streams::kTrainTestSplit);
    rng.shuffle(order);

    const auto n_test = static_cast<std::size_t>(
        std::llround(test_fraction * static_cast<double>(data.size())));
    std::vector<std::size_t> test_idx(order.begin(), order.begin() + static_cast<long>(n_test));
    std::vector<std::size_t> train_idx(order.begin() + static_cast<long>(n_test), order.end());
    // Keep original row order inside each part.
    std::sort(test_idx.begin(), test_idx.end());
    std::sort(train_idx.begin(), train_idx.end());
    return {data.subset(train_idx), data.subset(test_idx)};
}

double sorted_quantile(const std::vector<double>& sorted, double p) {
    if (sorted.empty()) throw ArgumentError("sorted_quantile: empty sample");
    if (p <= 0.0) return sorted.front();
    if (p >= 1.0) return sorted.back();
    const double h = p * static_cast<double>(sorted.size() - 1);
    const auto lo = static_cast<std::size_t>(h);
    const double frac = h - static_cast<double>(lo);
    if (lo + 1 >= sorted.size()) return sorted.back();
    return sorted[lo] + frac * (sorted[lo + 1] - sorted[lo]);
}

}  // namespace fedsurf
