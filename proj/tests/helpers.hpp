#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <vector>

#include "fedsurf/dataset.hpp"
#include "fedsurf/forest.hpp"
#include "fedsurf/rng.hpp"

namespace fedsurf::testing {

// Dataset with explicit feature matrix; schema columns are named x0..xd-1.
inline SurvivalDataset make_dataset(const std::vector<std::vector<double>>& features,
                                    const std::vector<double>& times,
                                    const std::vector<bool>& events) {
    FeatureSchema schema;
    const std::size_t d = features.empty() ? 0 : features.front().size();
    for (std::size_t j = 0; j < d; ++j) {
        schema.features.push_back({"x" + std::to_string(j), FeatureKind::Numerical, {}});
    }
    std::vector<SurvivalRecord> rows(times.size());
    for (std::size_t i = 0; i < times.size(); ++i) {
        rows[i].features = features.empty() ? std::vector<double>{} : features[i];
        rows[i].time = times[i];
        rows[i].event = events[i];
    }
    return SurvivalDataset(std::move(rows), std::move(schema));
}

// Random (time, event) dataset for fuzzing the estimators.
inline SurvivalDataset random_time_event_dataset(Rng& rng, std::size_t max_size = 40,
                                                 bool allow_all_censored = true) {
    const std::size_t n = 1 + rng.uniform_int(max_size);
    std::vector<double> times(n);
    std::vector<bool> events(n);
    bool any_event = false;
    for (std::size_t i = 0; i < n; ++i) {
        // Coarse grid so ties happen often.
        times[i] = static_cast<double>(rng.uniform_int(12)) * 0.5;
        events[i] = rng.uniform01() < 0.6;
        any_event = any_event || events[i];
    }
    if (!allow_all_censored && !any_event) events[0] = true;
    return make_dataset({}, times, events);
}

// Unweighted Harrell's concordance over all pairs; independent of the
// library's IPCW implementation.
inline double harrell_c_bruteforce(const SurvivalDataset& data,
                                   const std::vector<double>& risks) {
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
    return num / den;
}

// Exhaustive search over all (feature, midpoint-threshold) pairs, using
// materialized child datasets and the standalone statistic. Mirrors the
// documented routing and tie-break rules.
inline std::optional<SplitCandidate> brute_force_best_split(
    const SurvivalDataset& data, const std::vector<std::size_t>& candidates,
    const ForestParams& params) {
    std::optional<SplitCandidate> best;
    for (std::size_t f : candidates) {
        std::vector<double> values;
        for (const auto& r : data.records()) {
            if (!is_missing(r.features[f])) values.push_back(r.features[f]);
        }
        std::sort(values.begin(), values.end());
        values.erase(std::unique(values.begin(), values.end()), values.end());
        for (std::size_t v = 0; v + 1 < values.size(); ++v) {
            const double threshold = values[v] + 0.5 * (values[v + 1] - values[v]);
            if (!(threshold < values[v + 1])) continue;

            std::vector<std::size_t> left_idx, right_idx, missing_idx;
            for (std::size_t i = 0; i < data.size(); ++i) {
                const double x = data[i].features[f];
                if (is_missing(x)) {
                    missing_idx.push_back(i);
                } else if (x <= threshold) {
                    left_idx.push_back(i);
                } else {
                    right_idx.push_back(i);
                }
            }
            const MissingDirection dir = left_idx.size() >= right_idx.size()
                                             ? MissingDirection::Left
                                             : MissingDirection::Right;
            const SurvivalDataset left = data.subset(left_idx);
            const SurvivalDataset right = data.subset(right_idx);
            auto full_left = left_idx;
            auto full_right = right_idx;
            (dir == MissingDirection::Left ? full_left : full_right)
                .insert((dir == MissingDirection::Left ? full_left : full_right).end(),
                        missing_idx.begin(), missing_idx.end());

            auto count_events = [&](const std::vector<std::size_t>& idx) {
                std::size_t e = 0;
                for (std::size_t i : idx) e += data[i].event ? 1 : 0;
                return e;
            };
            if (full_left.size() < params.min_samples_leaf ||
                full_right.size() < params.min_samples_leaf) {
                continue;
            }
            if (count_events(full_left) < params.min_events_leaf ||
                count_events(full_right) < params.min_events_leaf) {
                continue;
            }

            const auto stat = log_rank_statistic(left, right);
            if (!stat) continue;
            const SplitCandidate cand{f, threshold, *stat, dir};
            if (!best || cand.statistic > best->statistic ||
                (cand.statistic == best->statistic &&
                 (cand.feature < best->feature ||
                  (cand.feature == best->feature && cand.threshold < best->threshold)))) {
                best = cand;
            }
        }
    }
    return best;
}

// Kolmogorov-Smirnov distance between two empirical time distributions.
inline double ks_distance(std::vector<double> a, std::vector<double> b) {
    std::sort(a.begin(), a.end());
    std::sort(b.begin(), b.end());
    double max_gap = 0.0;
    std::size_t ia = 0;
    std::size_t ib = 0;
    while (ia < a.size() && ib < b.size()) {
        if (a[ia] <= b[ib]) {
            ++ia;
        } else {
            ++ib;
        }
        const double fa = static_cast<double>(ia) / static_cast<double>(a.size());
        const double fb = static_cast<double>(ib) / static_cast<double>(b.size());
        max_gap = std::max(max_gap, std::abs(fa - fb));
    }
    return max_gap;
}

inline std::vector<double> times_of(const SurvivalDataset& data) {
    std::vector<double> t;
    t.reserve(data.size());
    for (const auto& r : data.records()) t.push_back(r.time);
    return t;
}

// Multiset equality on (time, event, features) triples.
inline bool same_multiset(const SurvivalDataset& a, const SurvivalDataset& b) {
    auto key = [](const SurvivalRecord& r) {
        std::vector<double> k = r.features;
        for (auto& x : k) {
            if (std::isnan(x)) x = -1e300;  // stable ordering for missing
        }
        k.push_back(r.time);
        k.push_back(r.event ? 1.0 : 0.0);
        return k;
    };
    std::vector<std::vector<double>> ka, kb;
    for (const auto& r : a.records()) ka.push_back(key(r));
    for (const auto& r : b.records()) kb.push_back(key(r));
    std::sort(ka.begin(), ka.end());
    std::sort(kb.begin(), kb.end());
    return ka == kb;
}

}  // namespace fedsurf::testing
