#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <vector>

#include "fedsurf/dataset.hpp"
#include "fedsurf/rng.hpp"
#include "fedsurf/step_function.hpp"

namespace fedsurf {

struct ForestParams {
    std::size_t n_trees = 100;
    std::size_t max_features = 0;          // 0 = auto: ceil(sqrt(d))
    std::optional<std::size_t> max_depth;  // unset = unbounded
    std::size_t min_samples_split = 10;
    std::size_t min_samples_leaf = 5;
    std::size_t min_events_leaf = 1;
    std::uint64_t seed = 0;

    std::size_t resolved_max_features(std::size_t d) const;
    void validate(std::size_t d) const;
};

enum class MissingDirection : std::uint8_t { Left, Right };

// Flat binary tree: children are indices into the node array, root at 0.
// An internal node tests feature <= threshold (missing values follow
// missing_direction); a leaf holds the cumulative hazard of its in-bag
// samples evaluated on the tree's time grid.
struct TreeNode {
    bool is_leaf = true;
    // internal
    std::size_t feature = 0;
    double threshold = 0.0;
    MissingDirection missing_direction = MissingDirection::Left;
    std::size_t left = 0;
    std::size_t right = 0;
    // leaf
    std::vector<double> chf;  // aligned to SurvivalTree::time_grid
};

class SurvivalTree {
public:
    std::vector<TreeNode> nodes;
    std::shared_ptr<const std::vector<double>> time_grid;
    std::size_t in_bag_count = 0;

    // Index of the leaf x is routed to.
    std::size_t route(std::span<const double> x) const;

    // CHF values (aligned to time_grid) of the leaf x is routed to.
    const std::vector<double>& leaf_chf(std::span<const double> x) const;

    // Right-continuous lookup of the routed leaf CHF at time t.
    double chf_at(std::span<const double> x, double t) const;

    StepFunction leaf_chf_function(std::span<const double> x) const;
};

class Forest {
public:
    std::vector<SurvivalTree> trees;
    std::size_t feature_count = 0;
    std::vector<double> time_grid;  // evaluation grid: union of tree grids

    std::size_t size() const { return trees.size(); }
};

// Two-sample log-rank statistic |sum (d1j - n1j dj / nj)| / sqrt(sum Vj)
// over the pooled distinct event times. Returns nullopt when either group
// is empty or the pooled sample has no events; returns 0 when the variance
// sum is 0.
std::optional<double> log_rank_statistic(const SurvivalDataset& left,
                                         const SurvivalDataset& right);

struct SplitCandidate {
    std::size_t feature = 0;
    double threshold = 0.0;
    double statistic = 0.0;
    MissingDirection missing_direction = MissingDirection::Left;
};

// Best (feature, threshold) by log-rank statistic over midpoint thresholds
// of every candidate feature, subject to min_samples_leaf/min_events_leaf
// on both children. Ties break to the lowest feature index, then the
// lowest threshold, so the result is independent of row order.
std::optional<SplitCandidate> best_split(const SurvivalDataset& node_data,
                                         const std::vector<std::size_t>& candidate_features,
                                         const ForestParams& params);

// One bootstrapped tree. The time grid is shared by every tree of a
// locally fitted forest (sorted distinct event times of `data`). The |data|
// bootstrap indices are the first draws taken from rng, so tests can replay
// them from a copy of the generator.
SurvivalTree fit_tree(const SurvivalDataset& data, const ForestParams& params,
                      std::shared_ptr<const std::vector<double>> time_grid, Rng rng);

// n_trees trees, tree i built from a stream derived from (seed, i); the
// result does not depend on n_jobs.
Forest fit_forest(const SurvivalDataset& data, const ForestParams& params, unsigned n_jobs = 1);

// Ensemble CHF: pointwise mean over trees of the routed leaf CHFs,
// evaluated on the forest's time grid by right-continuous lookup.
StepFunction predict_chf(const Forest& forest, std::span<const double> x);

// Scalar risk: sum of the ensemble CHF over the forest's time grid.
double predict_risk(const Forest& forest, std::span<const double> x);

// exp(-H) of the ensemble CHF.
StepFunction predict_survival(const Forest& forest, std::span<const double> x);

// Sorted union of the trees' time grids.
std::vector<double> union_time_grid(const std::vector<SurvivalTree>& trees);

}  // namespace fedsurf
