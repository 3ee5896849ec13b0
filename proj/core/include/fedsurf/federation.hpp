#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "fedsurf/dataset.hpp"
#include "fedsurf/errors.hpp"
#include "fedsurf/forest.hpp"
#include "fedsurf/metrics.hpp"
#include "fedsurf/rng.hpp"

namespace fedsurf {

enum class SplitKind { Uniform, LabelSkew };
enum class SamplingStrategy { Uniform, InverseIbs };

std::string to_string(SplitKind kind);
std::string to_string(SamplingStrategy strategy);

struct FederationConfig {
    std::size_t n_clients = 10;
    SplitKind split = SplitKind::Uniform;
    double alpha = 8.0;                   // Dirichlet concentration
    std::size_t min_client_samples = 25;  // label-skew floor
    std::size_t n_label_bins = 10;        // quantile bins over observed time
    std::size_t n_server_trees = 100;     // N_S
    SamplingStrategy sampling = SamplingStrategy::Uniform;
    double local_val_fraction = 0.2;
    std::uint64_t seed = 0;

    void validate(std::size_t training_size) const;
};

struct ClientState {
    std::size_t client_id = 0;
    SurvivalDataset local_train;
    SurvivalDataset local_val;
    Forest model;                 // M_k
    std::size_t n_trees = 0;      // N_k
    std::size_t quota = 0;        // N_k'
    std::size_t dataset_size = 0; // |D_k|
};

enum class MessageDirection { ClientToServer, ServerToClient };
enum class PayloadType { TreeCount, Quota, Trees };

struct Message {
    MessageDirection direction = MessageDirection::ClientToServer;
    PayloadType payload = PayloadType::TreeCount;
    std::size_t client_id = 0;
    std::size_t bytes = 0;
};

struct MessageLog {
    std::vector<Message> messages;

    std::size_t count(PayloadType payload) const;
    std::size_t count(PayloadType payload, std::size_t client_id) const;
    std::string to_jsonl() const;
};

struct ServerState {
    std::vector<std::size_t> quotas;  // N_k' per client, sum == n_server_trees
    std::vector<std::pair<std::size_t, SurvivalTree>> collected;
    Forest ensemble;  // M_S
    MessageLog log;
};

struct FedSurfResult {
    ServerState server;
    std::vector<ClientState> clients;
};

// Each record goes to a client with probability 1/K. An empty shard
// triggers a resample with a derived seed, up to 100 attempts.
std::vector<SurvivalDataset> uniform_split(const SurvivalDataset& train, std::size_t n_clients,
                                           std::uint64_t seed);

// Label-skewed split: observed times are discretized into quantile bins,
// each bin is allocated across clients with Dirichlet(alpha) proportions,
// then records move greedily from the largest shards until every shard
// holds at least min_client_samples.
std::vector<SurvivalDataset> label_skew_split(const SurvivalDataset& train,
                                              std::size_t n_clients, double alpha,
                                              std::size_t min_client_samples,
                                              std::size_t n_bins, std::uint64_t seed);

// 80/20-style local partition of one client shard; returns (train, validation).
std::pair<SurvivalDataset, SurvivalDataset> local_split(const SurvivalDataset& shard,
                                                        double val_fraction,
                                                        std::uint64_t seed);

// n_server_trees iterations, each incrementing the quota of a client drawn
// with probability proportional to its dataset size among clients still
// below their cap. Sum of quotas == n_server_trees, quotas <= caps.
std::vector<std::size_t> assign_tree_quotas(const std::vector<std::size_t>& sizes,
                                            const std::vector<std::size_t>& caps,
                                            std::size_t n_server_trees, Rng& rng);

// n draws proportional to weights, with or without replacement; returned
// values are indices into weights.
std::vector<std::size_t> weighted_sample_indices(std::size_t n,
                                                 const std::vector<double>& weights,
                                                 bool with_replacement, Rng& rng);

template <typename T>
std::vector<T> weighted_sample(std::size_t n, const std::vector<T>& items,
                               const std::vector<double>& weights, bool with_replacement,
                               Rng& rng) {
    if (items.size() != weights.size()) {
        throw ArgumentError("weighted_sample: items and weights differ in length");
    }
    std::vector<T> out;
    out.reserve(n);
    for (std::size_t idx : weighted_sample_indices(n, weights, with_replacement, rng)) {
        out.push_back(items[idx]);
    }
    return out;
}

// Indices of the quota trees the client sends: uniform weights, or weights
// 1/IBS_j computed on the client's own validation split. Always without
// replacement.
std::vector<std::size_t> select_local_tree_indices(const ClientState& client,
                                                   SamplingStrategy strategy,
                                                   const StepFunction& censoring,
                                                   const EvalGrid& grid, Rng& rng);

std::vector<SurvivalTree> select_local_trees(const ClientState& client,
                                             SamplingStrategy strategy,
                                             const StepFunction& censoring,
                                             const EvalGrid& grid, Rng& rng);

// FedSurF on pre-built client shards (one communication round: tree counts
// up, quotas down, sampled trees up).
FedSurfResult run_fedsurf_on_shards(const std::vector<SurvivalDataset>& shards,
                                    const FederationConfig& config,
                                    const ForestParams& forest_params, unsigned n_jobs = 1);

// Full protocol: split per config, fit local forests, assign quotas,
// sample trees, assemble the server ensemble.
FedSurfResult run_fedsurf(const SurvivalDataset& full_train, const FederationConfig& config,
                          const ForestParams& forest_params, unsigned n_jobs = 1);

// Each client's own forest scored on the shared test set.
std::vector<MetricsReport> run_local_baselines(const std::vector<ClientState>& clients,
                                               const SurvivalDataset& test,
                                               const EvalContext& ctx);

}  // namespace fedsurf
