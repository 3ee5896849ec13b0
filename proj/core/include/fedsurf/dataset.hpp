#pragma once

#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

namespace fedsurf {

// Feature values are doubles; a missing cell is NaN. Categorical features
// are ordinal codes (the index of the level in the schema's level list).
inline bool is_missing(double x) { return std::isnan(x); }
inline double missing_value() { return std::nan(""); }

enum class FeatureKind { Numerical, CategoricalOrdinal };

struct FeatureDescriptor {
    std::string name;
    FeatureKind kind = FeatureKind::Numerical;
    std::vector<std::string> levels;  // categorical only; code = index
};

// Column layout of a dataset: feature columns in order plus the names of
// the time and event columns and the string that marks a missing cell.
struct FeatureSchema {
    std::vector<FeatureDescriptor> features;
    std::string time_column = "time";
    std::string event_column = "event";
    std::string missing_marker = "?";

    std::size_t feature_count() const { return features.size(); }
};

// One (x_i, delta_i, t_i) triplet.
struct SurvivalRecord {
    std::vector<double> features;
    bool event = false;  // true = event observed, false = censored
    double time = 0.0;   // >= 0, finite
};

class SurvivalDataset {
public:
    SurvivalDataset() = default;
    SurvivalDataset(std::vector<SurvivalRecord> records, FeatureSchema schema);

    const std::vector<SurvivalRecord>& records() const { return records_; }
    const FeatureSchema& schema() const { return schema_; }
    const SurvivalRecord& operator[](std::size_t i) const { return records_[i]; }

    std::size_t size() const { return records_.size(); }
    bool empty() const { return records_.empty(); }
    std::size_t feature_count() const { return schema_.feature_count(); }

    std::size_t event_count() const;
    std::size_t censored_count() const { return size() - event_count(); }

    // Sorted distinct times at which an event occurred.
    std::vector<double> distinct_event_times() const;

    // New dataset holding the given rows (indices may repeat: bootstrap).
    SurvivalDataset subset(const std::vector<std::size_t>& indices) const;

private:
    std::vector<SurvivalRecord> records_;
    FeatureSchema schema_;
};

// Dataset with all feature vectors dropped (d = 0); used by tests and by
// estimator call sites that only need (event, time) pairs.
SurvivalDataset make_time_event_dataset(const std::vector<double>& times,
                                        const std::vector<bool>& events);

}  // namespace fedsurf
