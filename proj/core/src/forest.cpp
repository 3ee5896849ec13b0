#include "fedsurf/forest.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <thread>

#include "fedsurf/errors.hpp"
#include "fedsurf/estimators.hpp"

namespace fedsurf {

namespace {

// Per-distinct-event-time counts of a two-group comparison. The helper is
// the single source of truth for the statistic so that best_split's
// incremental sweep and the standalone log_rank_statistic produce bitwise
// identical values (the split-optimality oracle compares them exactly).
double logrank_from_counts(std::span<const std::size_t> d1, std::span<const std::size_t> n1,
                           std::span<const std::size_t> d, std::span<const std::size_t> n) {
    double numerator = 0.0;
    double variance = 0.0;
    for (std::size_t j = 0; j < d.size(); ++j) {
        const auto dj = static_cast<double>(d[j]);
        const auto nj = static_cast<double>(n[j]);
        const auto d1j = static_cast<double>(d1[j]);
        const auto n1j = static_cast<double>(n1[j]);
        numerator += d1j - n1j * dj / nj;
        if (n[j] > 1) {
            const double p = n1j / nj;
            variance += dj * p * (1.0 - p) * (nj - dj) / (nj - 1.0);
        }
    }
    if (!(variance > 0.0)) return 0.0;
    return std::abs(numerator) / std::sqrt(variance);
}

struct SweepObs {
    double value = 0.0;  // feature value (non-missing only)
    double time = 0.0;
    bool event = false;
};

// Counts over the pooled distinct event times of a record set, plus each
// record's contribution offsets for incremental risk-set updates.
struct PooledCounts {
    std::vector<double> event_times;   // sorted distinct, events only
    std::vector<std::size_t> d_all;    // events at time j
    std::vector<std::size_t> n_all;    // at risk at time j

    // A record with time t is at risk for rows [0, upper_bound(t)).
    std::size_t risk_prefix(double t) const {
        return static_cast<std::size_t>(
            std::upper_bound(event_times.begin(), event_times.end(), t) - event_times.begin());
    }
    std::size_t event_row(double t) const {
        return static_cast<std::size_t>(
            std::lower_bound(event_times.begin(), event_times.end(), t) - event_times.begin());
    }
};

template <typename TimeEventRange>
PooledCounts pooled_counts(const TimeEventRange& obs) {
    PooledCounts pc;
    for (const auto& o : obs) {
        if (o.event) pc.event_times.push_back(o.time);
    }
    std::sort(pc.event_times.begin(), pc.event_times.end());
    pc.event_times.erase(std::unique(pc.event_times.begin(), pc.event_times.end()),
                         pc.event_times.end());
    const std::size_t t_count = pc.event_times.size();
    pc.d_all.assign(t_count, 0);
    pc.n_all.assign(t_count, 0);
    std::vector<std::size_t> by_prefix(t_count + 1, 0);
    for (const auto& o : obs) {
        by_prefix[pc.risk_prefix(o.time)] += 1;
        if (o.event) pc.d_all[pc.event_row(o.time)] += 1;
    }
    std::size_t running = 0;
    for (std::size_t j = t_count; j-- > 0;) {
        running += by_prefix[j + 1];
        pc.n_all[j] = running;
    }
    return pc;
}

struct TimeEvent {
    double time;
    bool event;
};

// Row-index view over a bootstrap dataset; all tree growth works on these.
using Rows = std::vector<std::size_t>;

std::optional<SplitCandidate> best_split_rows(const std::vector<SurvivalRecord>& records,
                                              const Rows& rows,
                                              const std::vector<std::size_t>& candidate_features,
                                              const ForestParams& params) {
    std::optional<SplitCandidate> best;

    auto consider = [&](const SplitCandidate& cand) {
        if (!best || cand.statistic > best->statistic ||
            (cand.statistic == best->statistic &&
             (cand.feature < best->feature ||
              (cand.feature == best->feature && cand.threshold < best->threshold)))) {
            best = cand;
        }
    };

    for (std::size_t f : candidate_features) {
        std::vector<SweepObs> obs;
        obs.reserve(rows.size());
        std::size_t missing_total = 0;
        std::size_t missing_events = 0;
        for (std::size_t r : rows) {
            const auto& rec = records[r];
            const double x = rec.features[f];
            if (is_missing(x)) {
                ++missing_total;
                missing_events += rec.event ? 1 : 0;
            } else {
                obs.push_back({x, rec.time, rec.event});
            }
        }
        if (obs.size() < 2) continue;

        std::sort(obs.begin(), obs.end(),
                  [](const SweepObs& a, const SweepObs& b) { return a.value < b.value; });
        if (obs.front().value == obs.back().value) continue;

        const PooledCounts pc = pooled_counts(obs);
        if (pc.event_times.empty()) continue;  // statistic undefined without events
        const std::size_t t_count = pc.event_times.size();

        std::vector<std::size_t> d1(t_count, 0);
        std::vector<std::size_t> left_by_prefix(t_count + 1, 0);
        std::vector<std::size_t> n1(t_count, 0);
        std::size_t left_total = 0;
        std::size_t left_events = 0;

        std::size_t i = 0;
        while (i < obs.size()) {
            // Move the block of records sharing this feature value to the left.
            const double value = obs[i].value;
            while (i < obs.size() && obs[i].value == value) {
                left_by_prefix[pc.risk_prefix(obs[i].time)] += 1;
                if (obs[i].event) d1[pc.event_row(obs[i].time)] += 1;
                ++left_total;
                left_events += obs[i].event ? 1 : 0;
                ++i;
            }
            if (i == obs.size()) break;  // no records to the right

            const double threshold = value + 0.5 * (obs[i].value - value);
            // Guard against the midpoint rounding onto the right value, which
            // would stop the threshold from separating the two blocks.
            if (!(threshold < obs[i].value)) continue;
            const std::size_t right_total = obs.size() - left_total;
            const std::size_t right_events =
                static_cast<std::size_t>(std::accumulate(
                    pc.d_all.begin(), pc.d_all.end(), std::size_t{0})) - left_events;

            const MissingDirection dir =
                left_total >= right_total ? MissingDirection::Left : MissingDirection::Right;
            const std::size_t left_full =
                left_total + (dir == MissingDirection::Left ? missing_total : 0);
            const std::size_t right_full =
                right_total + (dir == MissingDirection::Right ? missing_total : 0);
            const std::size_t left_full_events =
                left_events + (dir == MissingDirection::Left ? missing_events : 0);
            const std::size_t right_full_events =
                right_events + (dir == MissingDirection::Right ? missing_events : 0);

            if (left_full < params.min_samples_leaf || right_full < params.min_samples_leaf) {
                continue;
            }
            if (left_full_events < params.min_events_leaf ||
                right_full_events < params.min_events_leaf) {
                continue;
            }

            std::size_t running = 0;
            for (std::size_t j = t_count; j-- > 0;) {
                running += left_by_prefix[j + 1];
                n1[j] = running;
            }
            const double stat = logrank_from_counts(d1, n1, pc.d_all, pc.n_all);
            consider({f, threshold, stat, dir});
        }
    }
    return best;
}

std::vector<double> chf_on_grid(const std::vector<SurvivalRecord>& records, const Rows& rows,
                                const std::vector<double>& grid) {
    std::vector<TimeEvent> obs;
    obs.reserve(rows.size());
    for (std::size_t r : rows) obs.push_back({records[r].time, records[r].event});
    const PooledCounts pc = pooled_counts(obs);

    // Cumulative hazard at the node's own event times, then sampled on the
    // shared grid by right-continuous lookup.
    std::vector<double> cumulative(pc.event_times.size());
    double h = 0.0;
    for (std::size_t j = 0; j < pc.event_times.size(); ++j) {
        h += static_cast<double>(pc.d_all[j]) / static_cast<double>(pc.n_all[j]);
        cumulative[j] = h;
    }

    std::vector<double> values(grid.size());
    std::size_t j = 0;
    double current = 0.0;
    for (std::size_t g = 0; g < grid.size(); ++g) {
        while (j < pc.event_times.size() && pc.event_times[j] <= grid[g]) {
            current = cumulative[j];
            ++j;
        }
        values[g] = current;
    }
    return values;
}

}  // namespace

std::size_t ForestParams::resolved_max_features(std::size_t d) const {
    if (max_features != 0) return max_features;
    return static_cast<std::size_t>(std::ceil(std::sqrt(static_cast<double>(d))));
}

void ForestParams::validate(std::size_t d) const {
    if (n_trees == 0) throw ArgumentError("ForestParams: n_trees must be positive");
    if (min_samples_split == 0 || min_samples_leaf == 0) {
        throw ArgumentError("ForestParams: min_samples_* must be positive");
    }
    if (min_samples_leaf > min_samples_split) {
        throw ArgumentError("ForestParams: min_samples_leaf must not exceed min_samples_split");
    }
    if (d > 0 && resolved_max_features(d) > d) {
        throw ArgumentError("ForestParams: max_features exceeds feature count");
    }
}

std::size_t SurvivalTree::route(std::span<const double> x) const {
    std::size_t idx = 0;
    while (!nodes[idx].is_leaf) {
        const auto& node = nodes[idx];
        const double v = x[node.feature];
        if (is_missing(v)) {
            idx = node.missing_direction == MissingDirection::Left ? node.left : node.right;
        } else {
            idx = v <= node.threshold ? node.left : node.right;
        }
    }
    return idx;
}

const std::vector<double>& SurvivalTree::leaf_chf(std::span<const double> x) const {
    return nodes[route(x)].chf;
}

double SurvivalTree::chf_at(std::span<const double> x, double t) const {
    const auto& grid = *time_grid;
    const auto& values = leaf_chf(x);
    auto it = std::upper_bound(grid.begin(), grid.end(), t);
    if (it == grid.begin()) return 0.0;
    return values[static_cast<std::size_t>(it - grid.begin()) - 1];
}

StepFunction SurvivalTree::leaf_chf_function(std::span<const double> x) const {
    return StepFunction(*time_grid, leaf_chf(x), 0.0);
}

std::optional<double> log_rank_statistic(const SurvivalDataset& left,
                                         const SurvivalDataset& right) {
    if (left.empty() || right.empty()) return std::nullopt;

    std::vector<TimeEvent> pooled;
    pooled.reserve(left.size() + right.size());
    for (const auto& r : left.records()) pooled.push_back({r.time, r.event});
    for (const auto& r : right.records()) pooled.push_back({r.time, r.event});
    const PooledCounts pc = pooled_counts(pooled);
    if (pc.event_times.empty()) return std::nullopt;

    const std::size_t t_count = pc.event_times.size();
    std::vector<std::size_t> d1(t_count, 0);
    std::vector<std::size_t> by_prefix(t_count + 1, 0);
    for (const auto& r : left.records()) {
        by_prefix[pc.risk_prefix(r.time)] += 1;
        if (r.event) d1[pc.event_row(r.time)] += 1;
    }
    std::vector<std::size_t> n1(t_count, 0);
    std::size_t running = 0;
    for (std::size_t j = t_count; j-- > 0;) {
        running += by_prefix[j + 1];
        n1[j] = running;
    }
    return logrank_from_counts(d1, n1, pc.d_all, pc.n_all);
}

std::optional<SplitCandidate> best_split(const SurvivalDataset& node_data,
                                         const std::vector<std::size_t>& candidate_features,
                                         const ForestParams& params) {
    if (node_data.empty()) throw ArgumentError("best_split: node data is empty");
    if (candidate_features.empty()) {
        throw ArgumentError("best_split: candidate_features is empty");
    }
    for (std::size_t f : candidate_features) {
        if (f >= node_data.feature_count()) {
            throw ArgumentError("best_split: feature index out of range");
        }
    }
    Rows rows(node_data.size());
    std::iota(rows.begin(), rows.end(), std::size_t{0});
    return best_split_rows(node_data.records(), rows, candidate_features, params);
}

SurvivalTree fit_tree(const SurvivalDataset& data, const ForestParams& params,
                      std::shared_ptr<const std::vector<double>> time_grid, Rng rng) {
    if (data.empty()) throw ArgumentError("fit_tree: dataset is empty");
    const std::size_t n = data.size();
    const std::size_t d = data.feature_count();
    const std::size_t m = params.resolved_max_features(d);

    std::vector<std::size_t> bootstrap(n);
    for (auto& idx : bootstrap) idx = static_cast<std::size_t>(rng.uniform_int(n));
    const SurvivalDataset bag = data.subset(bootstrap);
    const auto& records = bag.records();

    SurvivalTree tree;
    tree.time_grid = std::move(time_grid);
    {
        std::vector<std::size_t> sorted = bootstrap;
        std::sort(sorted.begin(), sorted.end());
        tree.in_bag_count = static_cast<std::size_t>(
            std::unique(sorted.begin(), sorted.end()) - sorted.begin());
    }

    std::vector<std::size_t> feature_pool(d);
    std::iota(feature_pool.begin(), feature_pool.end(), std::size_t{0});
    auto draw_features = [&]() {
        std::vector<std::size_t> chosen;
        chosen.reserve(m);
        for (std::size_t i = 0; i < m; ++i) {
            const std::size_t j =
                i + static_cast<std::size_t>(rng.uniform_int(static_cast<std::uint64_t>(d - i)));
            std::swap(feature_pool[i], feature_pool[j]);
            chosen.push_back(feature_pool[i]);
        }
        return chosen;
    };

    struct PendingNode {
        Rows rows;
        std::size_t depth;
        std::size_t node_index;
    };

    tree.nodes.emplace_back();
    std::vector<PendingNode> stack;
    {
        Rows all(n);
        std::iota(all.begin(), all.end(), std::size_t{0});
        stack.push_back({std::move(all), 0, 0});
    }

    while (!stack.empty()) {
        PendingNode item = std::move(stack.back());
        stack.pop_back();

        std::optional<SplitCandidate> split;
        const bool depth_ok = !params.max_depth || item.depth < *params.max_depth;
        if (depth_ok && item.rows.size() >= params.min_samples_split && d > 0) {
            split = best_split_rows(records, item.rows, draw_features(), params);
        }

        if (!split) {
            auto& leaf = tree.nodes[item.node_index];
            leaf.is_leaf = true;
            leaf.chf = chf_on_grid(records, item.rows, *tree.time_grid);
            continue;
        }

        Rows left_rows;
        Rows right_rows;
        for (std::size_t r : item.rows) {
            const double v = records[r].features[split->feature];
            bool go_left;
            if (is_missing(v)) {
                go_left = split->missing_direction == MissingDirection::Left;
            } else {
                go_left = v <= split->threshold;
            }
            (go_left ? left_rows : right_rows).push_back(r);
        }

        const std::size_t left_index = tree.nodes.size();
        tree.nodes.emplace_back();
        const std::size_t right_index = tree.nodes.size();
        tree.nodes.emplace_back();

        auto& node = tree.nodes[item.node_index];
        node.is_leaf = false;
        node.feature = split->feature;
        node.threshold = split->threshold;
        node.missing_direction = split->missing_direction;
        node.left = left_index;
        node.right = right_index;

        // Right pushed first so the left child is grown first; growth order
        // only affects node numbering, which the seed fully determines.
        stack.push_back({std::move(right_rows), item.depth + 1, right_index});
        stack.push_back({std::move(left_rows), item.depth + 1, left_index});
    }
    return tree;
}

Forest fit_forest(const SurvivalDataset& data, const ForestParams& params, unsigned n_jobs) {
    if (data.empty()) throw ArgumentError("fit_forest: dataset is empty");
    params.validate(data.feature_count());

    auto grid = std::make_shared<const std::vector<double>>(data.distinct_event_times());

    Forest forest;
    forest.feature_count = data.feature_count();
    forest.time_grid = *grid;
    forest.trees.resize(params.n_trees);

    const Rng root(params.seed);
    const Rng tree_stream = root.derive(streams::kForestTree);
    auto fit_range = [&](std::size_t begin, std::size_t end) {
        for (std::size_t i = begin; i < end; ++i) {
            forest.trees[i] = fit_tree(data, params, grid, tree_stream.derive(i));
        }
    };

    if (n_jobs <= 1 || params.n_trees < 2) {
        fit_range(0, params.n_trees);
    } else {
        const std::size_t workers = std::min<std::size_t>(n_jobs, params.n_trees);
        std::vector<std::thread> pool;
        pool.reserve(workers);
        const std::size_t chunk = (params.n_trees + workers - 1) / workers;
        for (std::size_t w = 0; w < workers; ++w) {
            const std::size_t begin = w * chunk;
            const std::size_t end = std::min(params.n_trees, begin + chunk);
            if (begin >= end) break;
            pool.emplace_back(fit_range, begin, end);
        }
        for (auto& t : pool) t.join();
    }
    return forest;
}

std::vector<double> union_time_grid(const std::vector<SurvivalTree>& trees) {
    std::vector<double> grid;
    for (const auto& tree : trees) {
        grid.insert(grid.end(), tree.time_grid->begin(), tree.time_grid->end());
    }
    std::sort(grid.begin(), grid.end());
    grid.erase(std::unique(grid.begin(), grid.end()), grid.end());
    return grid;
}

StepFunction predict_chf(const Forest& forest, std::span<const double> x) {
    if (forest.trees.empty()) throw ArgumentError("predict_chf: forest has no trees");
    if (x.size() != forest.feature_count) {
        throw ArgumentError("predict_chf: feature vector has length " +
                            std::to_string(x.size()) + ", forest expects " +
                            std::to_string(forest.feature_count));
    }

    const auto& grid = forest.time_grid;
    std::vector<double> acc(grid.size(), 0.0);
    for (const auto& tree : forest.trees) {
        const auto& values = tree.leaf_chf(x);
        const auto& tree_grid = *tree.time_grid;
        // Two-pointer right-continuous lookup of this tree's CHF on the
        // forest grid; exact pass-through when the grids coincide.
        std::size_t j = 0;
        double current = 0.0;
        for (std::size_t g = 0; g < grid.size(); ++g) {
            while (j < tree_grid.size() && tree_grid[j] <= grid[g]) {
                current = values[j];
                ++j;
            }
            acc[g] += current;
        }
    }
    const auto n = static_cast<double>(forest.trees.size());
    for (auto& v : acc) v /= n;
    return StepFunction(grid, std::move(acc), 0.0);
}

double predict_risk(const Forest& forest, std::span<const double> x) {
    const StepFunction chf = predict_chf(forest, x);
    double total = 0.0;
    for (double v : chf.values()) total += v;
    return total;
}

StepFunction predict_survival(const Forest& forest, std::span<const double> x) {
    return chf_to_survival(predict_chf(forest, x));
}

}  // namespace fedsurf
