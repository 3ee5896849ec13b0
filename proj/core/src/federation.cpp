#include "fedsurf/federation.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <thread>

#include <json.hpp>

#include "fedsurf/estimators.hpp"
#include "fedsurf/forest_io.hpp"

namespace fedsurf {

namespace {

std::vector<SurvivalDataset> shards_from_indices(const SurvivalDataset& train,
                                                 std::vector<std::vector<std::size_t>>& shards) {
    std::vector<SurvivalDataset> out;
    out.reserve(shards.size());
    for (auto& idx : shards) {
        std::sort(idx.begin(), idx.end());  // keep original row order inside a shard
        out.push_back(train.subset(idx));
    }
    return out;
}

template <typename Fn>
void rethrow_with_stage(const char* stage, Fn&& fn) {
    try {
        fn();
    } catch (const std::exception& e) {
        throw Error(std::string("fedsurf stage '") + stage + "' failed: " + e.what());
    }
}

}  // namespace

std::string to_string(SplitKind kind) {
    return kind == SplitKind::Uniform ? "uniform" : "label_skew";
}

std::string to_string(SamplingStrategy strategy) {
    return strategy == SamplingStrategy::Uniform ? "uniform" : "inverse_ibs";
}

void FederationConfig::validate(std::size_t training_size) const {
    if (n_clients < 1) throw ConfigError("FederationConfig: n_clients must be at least 1");
    if (!(alpha > 0.0)) throw ConfigError("FederationConfig: alpha must be positive");
    if (n_server_trees < 1) throw ConfigError("FederationConfig: n_server_trees must be positive");
    if (!(local_val_fraction > 0.0 && local_val_fraction < 1.0)) {
        throw ConfigError("FederationConfig: local_val_fraction must lie in (0, 1)");
    }
    if (min_client_samples * n_clients > training_size) {
        throw ConfigError("FederationConfig: min_client_samples * n_clients exceeds the training set");
    }
}

std::size_t MessageLog::count(PayloadType payload) const {
    std::size_t n = 0;
    for (const auto& m : messages) n += m.payload == payload ? 1 : 0;
    return n;
}

std::size_t MessageLog::count(PayloadType payload, std::size_t client_id) const {
    std::size_t n = 0;
    for (const auto& m : messages) {
        n += (m.payload == payload && m.client_id == client_id) ? 1 : 0;
    }
    return n;
}

std::string MessageLog::to_jsonl() const {
    std::string out;
    for (const auto& m : messages) {
        nlohmann::json j;
        j["direction"] =
            m.direction == MessageDirection::ClientToServer ? "client_to_server" : "server_to_client";
        switch (m.payload) {
            case PayloadType::TreeCount: j["payload"] = "tree_count"; break;
            case PayloadType::Quota: j["payload"] = "quota"; break;
            case PayloadType::Trees: j["payload"] = "trees"; break;
        }
        j["client"] = m.client_id;
        j["bytes"] = m.bytes;
        out += j.dump();
        out += '\n';
    }
    return out;
}

std::vector<SurvivalDataset> uniform_split(const SurvivalDataset& train, std::size_t n_clients,
                                           std::uint64_t seed) {
    if (n_clients < 1) throw ArgumentError("uniform_split: n_clients must be at least 1");
    if (train.size() < n_clients) {
        throw ConfigError("uniform_split: fewer records than clients");
    }

    const Rng base = Rng(seed).derive(streams::kFederationSplit);
    for (std::uint64_t attempt = 0; attempt < 100; ++attempt) {
        Rng rng = base.derive(attempt);
        std::vector<std::vector<std::size_t>> shards(n_clients);
        for (std::size_t i = 0; i < train.size(); ++i) {
            shards[rng.uniform_int(n_clients)].push_back(i);
        }
        const bool all_nonempty =
            std::none_of(shards.begin(), shards.end(), [](const auto& s) { return s.empty(); });
        if (all_nonempty) return shards_from_indices(train, shards);
    }
    throw ConfigError("uniform_split: a client received no records in 100 attempts");
}

std::vector<SurvivalDataset> label_skew_split(const SurvivalDataset& train,
                                              std::size_t n_clients, double alpha,
                                              std::size_t min_client_samples,
                                              std::size_t n_bins, std::uint64_t seed) {
    if (n_clients < 1) throw ArgumentError("label_skew_split: n_clients must be at least 1");
    if (n_bins < 2) throw ArgumentError("label_skew_split: n_bins must be at least 2");
    if (!(alpha > 0.0)) throw ArgumentError("label_skew_split: alpha must be positive");
    if (min_client_samples * n_clients > train.size()) {
        throw ConfigError("label_skew_split: min_client_samples * n_clients exceeds the dataset");
    }

    // Quantile bin edges over observed time (events and censorings alike).
    std::vector<double> times;
    times.reserve(train.size());
    for (const auto& r : train.records()) times.push_back(r.time);
    std::sort(times.begin(), times.end());
    std::vector<double> edges(n_bins - 1);
    for (std::size_t b = 0; b + 1 < n_bins; ++b) {
        edges[b] = sorted_quantile(times, static_cast<double>(b + 1) / static_cast<double>(n_bins));
    }
    auto bin_of = [&](double t) {
        return static_cast<std::size_t>(
            std::lower_bound(edges.begin(), edges.end(), t) - edges.begin());
    };

    std::vector<std::vector<std::size_t>> records_by_bin(n_bins);
    for (std::size_t i = 0; i < train.size(); ++i) {
        records_by_bin[bin_of(train[i].time)].push_back(i);
    }

    Rng rng = Rng(seed).derive(streams::kFederationSplit);
    std::vector<std::vector<std::size_t>> shards(n_clients);
    for (const auto& bin : records_by_bin) {
        if (bin.empty()) continue;
        const std::vector<double> p = rng.dirichlet(alpha, n_clients);
        std::vector<double> cdf(p.size());
        std::partial_sum(p.begin(), p.end(), cdf.begin());
        for (std::size_t i : bin) {
            const double u = rng.uniform01();
            const auto client = static_cast<std::size_t>(
                std::lower_bound(cdf.begin(), cdf.end(), u) - cdf.begin());
            shards[std::min(client, n_clients - 1)].push_back(i);
        }
    }

    // Greedy rebalance: take from the largest shard until the floor holds.
    while (true) {
        std::size_t smallest = 0;
        std::size_t largest = 0;
        for (std::size_t k = 1; k < n_clients; ++k) {
            if (shards[k].size() < shards[smallest].size()) smallest = k;
            if (shards[k].size() > shards[largest].size()) largest = k;
        }
        if (shards[smallest].size() >= min_client_samples) break;
        shards[smallest].push_back(shards[largest].back());
        shards[largest].pop_back();
    }

    return shards_from_indices(train, shards);
}

std::pair<SurvivalDataset, SurvivalDataset> local_split(const SurvivalDataset& shard,
                                                        double val_fraction,
                                                        std::uint64_t seed) {
    return train_test_split(shard, val_fraction, seed);
}

std::vector<std::size_t> assign_tree_quotas(const std::vector<std::size_t>& sizes,
                                            const std::vector<std::size_t>& caps,
                                            std::size_t n_server_trees, Rng& rng) {
    if (sizes.empty() || sizes.size() != caps.size()) {
        throw ArgumentError("assign_tree_quotas: sizes and caps must be non-empty and equal length");
    }
    for (std::size_t s : sizes) {
        if (s == 0) throw ArgumentError("assign_tree_quotas: client dataset sizes must be positive");
    }
    const std::size_t total_caps = std::accumulate(caps.begin(), caps.end(), std::size_t{0});
    if (total_caps < n_server_trees) {
        throw ConfigError("assign_tree_quotas: client tree caps sum to " +
                          std::to_string(total_caps) + ", fewer than the " +
                          std::to_string(n_server_trees) + " requested server trees");
    }

    std::vector<std::size_t> quotas(sizes.size(), 0);
    for (std::size_t iter = 0; iter < n_server_trees; ++iter) {
        double total = 0.0;
        for (std::size_t k = 0; k < sizes.size(); ++k) {
            if (quotas[k] < caps[k]) total += static_cast<double>(sizes[k]);
        }
        const double u = rng.uniform01() * total;
        double running = 0.0;
        std::size_t chosen = sizes.size();
        for (std::size_t k = 0; k < sizes.size(); ++k) {
            if (quotas[k] >= caps[k]) continue;
            running += static_cast<double>(sizes[k]);
            if (u < running) {
                chosen = k;
                break;
            }
        }
        if (chosen == sizes.size()) {
            // Numerical edge: u landed on the top of the cumulative sum.
            for (std::size_t k = sizes.size(); k-- > 0;) {
                if (quotas[k] < caps[k]) {
                    chosen = k;
                    break;
                }
            }
        }
        quotas[chosen] += 1;
    }
    return quotas;
}

std::vector<std::size_t> weighted_sample_indices(std::size_t n,
                                                 const std::vector<double>& weights,
                                                 bool with_replacement, Rng& rng) {
    if (weights.empty()) throw ArgumentError("weighted_sample: weights are empty");
    for (double w : weights) {
        if (!(w > 0.0) || !std::isfinite(w)) {
            throw ArgumentError("weighted_sample: weights must be positive and finite");
        }
    }
    if (!with_replacement && n > weights.size()) {
        throw ArgumentError("weighted_sample: cannot draw " + std::to_string(n) +
                            " items without replacement from " + std::to_string(weights.size()));
    }

    std::vector<double> active = weights;
    std::vector<std::size_t> out;
    out.reserve(n);
    for (std::size_t draw = 0; draw < n; ++draw) {
        double total = 0.0;
        for (double w : active) total += w;
        const double u = rng.uniform01() * total;
        double running = 0.0;
        std::size_t chosen = active.size();
        for (std::size_t k = 0; k < active.size(); ++k) {
            if (active[k] <= 0.0) continue;
            running += active[k];
            if (u < running) {
                chosen = k;
                break;
            }
        }
        if (chosen == active.size()) {
            for (std::size_t k = active.size(); k-- > 0;) {
                if (active[k] > 0.0) {
                    chosen = k;
                    break;
                }
            }
        }
        out.push_back(chosen);
        if (!with_replacement) active[chosen] = 0.0;
    }
    return out;
}

std::vector<std::size_t> select_local_tree_indices(const ClientState& client,
                                                   SamplingStrategy strategy,
                                                   const StepFunction& censoring,
                                                   const EvalGrid& grid, Rng& rng) {
    if (client.quota > client.n_trees) {
        throw ArgumentError("select_local_trees: quota exceeds the number of local trees");
    }
    if (client.quota == 0) return {};

    std::vector<double> weights(client.n_trees, 1.0);
    if (strategy == SamplingStrategy::InverseIbs) {
        if (client.local_val.empty()) {
            throw EvalError(
                "select_local_trees: validation split is empty; fall back to uniform sampling");
        }
        for (std::size_t j = 0; j < client.n_trees; ++j) {
            weights[j] = 1.0 / per_tree_ibs(client.model.trees[j], client.local_val,
                                            censoring, grid);
        }
    }
    return weighted_sample_indices(client.quota, weights, false, rng);
}

std::vector<SurvivalTree> select_local_trees(const ClientState& client,
                                             SamplingStrategy strategy,
                                             const StepFunction& censoring,
                                             const EvalGrid& grid, Rng& rng) {
    std::vector<SurvivalTree> out;
    for (std::size_t idx : select_local_tree_indices(client, strategy, censoring, grid, rng)) {
        out.push_back(client.model.trees[idx]);
    }
    return out;
}

FedSurfResult run_fedsurf_on_shards(const std::vector<SurvivalDataset>& shards,
                                    const FederationConfig& config,
                                    const ForestParams& forest_params, unsigned n_jobs) {
    if (shards.empty()) throw ArgumentError("run_fedsurf: no client shards");

    FedSurfResult result;
    auto& clients = result.clients;
    auto& server = result.server;
    clients.resize(shards.size());

    // Stage 1-2: local split and local training, independent across clients.
    rethrow_with_stage("local training", [&] {
        auto fit_client = [&](std::size_t k) {
            ClientState& client = clients[k];
            client.client_id = k;
            client.dataset_size = shards[k].size();
            auto [local_train, local_val] = local_split(
                shards[k], config.local_val_fraction,
                derive_seed(config.seed, streams::kLocalSplit, k));
            client.local_train = std::move(local_train);
            client.local_val = std::move(local_val);

            ForestParams params = forest_params;
            params.seed = derive_seed(forest_params.seed, streams::kClientForest, k);
            client.model = fit_forest(client.local_train, params, 1);
            client.n_trees = client.model.size();
        };
        if (n_jobs <= 1 || shards.size() < 2) {
            for (std::size_t k = 0; k < shards.size(); ++k) fit_client(k);
        } else {
            std::vector<std::thread> pool;
            const std::size_t workers = std::min<std::size_t>(n_jobs, shards.size());
            const std::size_t chunk = (shards.size() + workers - 1) / workers;
            for (std::size_t w = 0; w < workers; ++w) {
                const std::size_t begin = w * chunk;
                const std::size_t end = std::min(shards.size(), begin + chunk);
                if (begin >= end) break;
                pool.emplace_back([&, begin, end] {
                    for (std::size_t k = begin; k < end; ++k) fit_client(k);
                });
            }
            for (auto& t : pool) t.join();
        }
    });

    // Stage 3: the server learns tree counts and assigns quotas.
    rethrow_with_stage("tree assignment", [&] {
        std::vector<std::size_t> sizes;
        std::vector<std::size_t> caps;
        for (const auto& client : clients) {
            server.log.messages.push_back(
                {MessageDirection::ClientToServer, PayloadType::TreeCount, client.client_id,
                 sizeof(std::uint64_t)});
            sizes.push_back(client.dataset_size);
            caps.push_back(client.n_trees);
        }
        Rng quota_rng = Rng(config.seed).derive(streams::kTreeQuota);
        server.quotas = assign_tree_quotas(sizes, caps, config.n_server_trees, quota_rng);
        for (auto& client : clients) {
            client.quota = server.quotas[client.client_id];
            server.log.messages.push_back(
                {MessageDirection::ServerToClient, PayloadType::Quota, client.client_id,
                 sizeof(std::uint64_t)});
        }
    });

    // Stage 4: each client samples its quota of trees; independent across
    // clients, so it parallelizes like the fitting stage. The server
    // appends payloads in client order afterwards.
    rethrow_with_stage("tree sampling", [&] {
        std::vector<std::vector<std::size_t>> chosen_by_client(clients.size());
        auto select_for = [&](std::size_t k) {
            ClientState& client = clients[k];
            if (client.quota == 0) return;
            Rng select_rng =
                Rng(config.seed).derive(streams::kTreeSelection).derive(client.client_id);
            if (config.sampling == SamplingStrategy::InverseIbs) {
                const StepFunction censoring = censoring_survival(client.local_train);
                const EvalGrid grid = EvalGrid::from_training(client.local_train);
                chosen_by_client[k] = select_local_tree_indices(
                    client, SamplingStrategy::InverseIbs, censoring, grid, select_rng);
            } else {
                // Uniform selection never reads the validation metrics.
                const StepFunction unused;
                const EvalGrid grid({0.0, 1.0});
                chosen_by_client[k] = select_local_tree_indices(
                    client, SamplingStrategy::Uniform, unused, grid, select_rng);
            }
        };
        if (n_jobs <= 1 || clients.size() < 2) {
            for (std::size_t k = 0; k < clients.size(); ++k) select_for(k);
        } else {
            std::vector<std::thread> pool;
            const std::size_t workers = std::min<std::size_t>(n_jobs, clients.size());
            const std::size_t chunk = (clients.size() + workers - 1) / workers;
            for (std::size_t w = 0; w < workers; ++w) {
                const std::size_t begin = w * chunk;
                const std::size_t end = std::min(clients.size(), begin + chunk);
                if (begin >= end) break;
                pool.emplace_back([&, begin, end] {
                    for (std::size_t k = begin; k < end; ++k) select_for(k);
                });
            }
            for (auto& t : pool) t.join();
        }

        for (const auto& client : clients) {
            if (client.quota == 0) continue;
            std::size_t payload_bytes = 0;
            for (std::size_t idx : chosen_by_client[client.client_id]) {
                const auto& tree = client.model.trees[idx];
                payload_bytes += tree_to_json(tree).size();
                server.collected.emplace_back(client.client_id, tree);
            }
            server.log.messages.push_back(
                {MessageDirection::ClientToServer, PayloadType::Trees, client.client_id,
                 payload_bytes});
        }
    });

    // Stage 5: the server unions the received trees into the ensemble.
    rethrow_with_stage("ensemble assembly", [&] {
        server.ensemble.feature_count = clients.front().model.feature_count;
        for (auto& [client_id, tree] : server.collected) {
            server.ensemble.trees.push_back(tree);
        }
        if (server.ensemble.trees.size() != config.n_server_trees) {
            throw Error("ensemble size " + std::to_string(server.ensemble.trees.size()) +
                        " does not match n_server_trees");
        }
        server.ensemble.time_grid = union_time_grid(server.ensemble.trees);
    });

    return result;
}

FedSurfResult run_fedsurf(const SurvivalDataset& full_train, const FederationConfig& config,
                          const ForestParams& forest_params, unsigned n_jobs) {
    config.validate(full_train.size());
    std::vector<SurvivalDataset> shards;
    rethrow_with_stage("data split", [&] {
        if (config.split == SplitKind::Uniform) {
            shards = uniform_split(full_train, config.n_clients, config.seed);
        } else {
            shards = label_skew_split(full_train, config.n_clients, config.alpha,
                                      config.min_client_samples, config.n_label_bins,
                                      config.seed);
        }
    });
    return run_fedsurf_on_shards(shards, config, forest_params, n_jobs);
}

std::vector<MetricsReport> run_local_baselines(const std::vector<ClientState>& clients,
                                               const SurvivalDataset& test,
                                               const EvalContext& ctx) {
    std::vector<MetricsReport> reports;
    reports.reserve(clients.size());
    for (const auto& client : clients) {
        MetricsReport report = evaluate_forest(client.model, test, ctx);
        report.model = "client_" + std::to_string(client.client_id);
        report.setting = "local";
        reports.push_back(std::move(report));
    }
    return reports;
}

}  // namespace fedsurf
