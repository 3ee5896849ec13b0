#include "fedsurf/dataset.hpp"

#include <algorithm>

#include "fedsurf/errors.hpp"

namespace fedsurf {

SurvivalDataset::SurvivalDataset(std::vector<SurvivalRecord> records, FeatureSchema schema)
    : records_(std::move(records)), schema_(std::move(schema)) {
    const std::size_t d = schema_.feature_count();
    for (std::size_t i = 0; i < records_.size(); ++i) {
        const auto& r = records_[i];
        if (r.features.size() != d) {
            throw ArgumentError("SurvivalDataset: record " + std::to_string(i) +
                                " has " + std::to_string(r.features.size()) +
                                " features, schema declares " + std::to_string(d));
        }
        if (!(r.time >= 0.0) || !std::isfinite(r.time)) {
            throw ArgumentError("SurvivalDataset: record " + std::to_string(i) +
                                " has negative or non-finite time");
        }
        for (double x : r.features) {
            if (!is_missing(x) && !std::isfinite(x)) {
                throw ArgumentError("SurvivalDataset: record " + std::to_string(i) +
                                    " has a non-finite feature value");
            }
        }
    }
}

std::size_t SurvivalDataset::event_count() const {
    std::size_t n = 0;
    for (const auto& r : records_) n += r.event ? 1 : 0;
    return n;
}

std::vector<double> SurvivalDataset::distinct_event_times() const {
    std::vector<double> times;
    times.reserve(records_.size());
    for (const auto& r : records_) {
        if (r.event) times.push_back(r.time);
    }
    std::sort(times.begin(), times.end());
    times.erase(std::unique(times.begin(), times.end()), times.end());
    return times;
}

SurvivalDataset SurvivalDataset::subset(const std::vector<std::size_t>& indices) const {
    std::vector<SurvivalRecord> rows;
    rows.reserve(indices.size());
    for (std::size_t i : indices) {
        if (i >= records_.size()) {
            throw ArgumentError("SurvivalDataset::subset: index out of range");
        }
        rows.push_back(records_[i]);
    }
    return SurvivalDataset(std::move(rows), schema_);
}

SurvivalDataset make_time_event_dataset(const std::vector<double>& times,
                                        const std::vector<bool>& events) {
    if (times.size() != events.size()) {
        throw ArgumentError("make_time_event_dataset: times and events differ in length");
    }
    std::vector<SurvivalRecord> rows(times.size());
    for (std::size_t i = 0; i < times.size(); ++i) {
        rows[i].time = times[i];
        rows[i].event = events[i];
    }
    return SurvivalDataset(std::move(rows), FeatureSchema{});
}

}  // namespace fedsurf
