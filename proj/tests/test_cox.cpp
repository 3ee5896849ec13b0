#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "fedsurf/cox.hpp"
#include "fedsurf/errors.hpp"
#include "fedsurf/estimators.hpp"
#include "fedsurf/federation.hpp"
#include "fedsurf/metrics.hpp"
#include "fedsurf/synthetic.hpp"
#include "helpers.hpp"

using namespace fedsurf;
using namespace fedsurf::testing;

namespace {

double norm2(const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s += x * x;
    return std::sqrt(s);
}

// Central finite differences of the loss, the independent gradient oracle.
std::vector<double> fd_gradient(const std::vector<double>& beta, const SurvivalDataset& data,
                                double h = 1e-5) {
    std::vector<double> grad(beta.size());
    for (std::size_t j = 0; j < beta.size(); ++j) {
        auto plus = beta;
        auto minus = beta;
        plus[j] += h;
        minus[j] -= h;
        grad[j] = (cox_neg_partial_loglik(plus, data) - cox_neg_partial_loglik(minus, data)) /
                  (2.0 * h);
    }
    return grad;
}

SurvivalDataset random_cox_dataset(Rng& rng, std::size_t max_n = 50, std::size_t max_d = 5) {
    const std::size_t n = 3 + rng.uniform_int(max_n - 2);
    const std::size_t d = 1 + rng.uniform_int(max_d);
    std::vector<std::vector<double>> features(n, std::vector<double>(d));
    std::vector<double> times(n);
    std::vector<bool> events(n);
    bool any_event = false;
    for (std::size_t i = 0; i < n; ++i) {
        for (auto& x : features[i]) x = 2.0 * rng.uniform01() - 1.0;
        times[i] = 1.0 + static_cast<double>(rng.uniform_int(12));  // ties likely
        events[i] = rng.uniform01() < 0.7;
        any_event = any_event || events[i];
    }
    if (!any_event) events[0] = true;
    return make_dataset(features, times, events);
}

}  // namespace

TEST_CASE("partial log-likelihood at beta zero on three uncensored times") {
    const auto data = make_dataset({{1.0}, {2.0}, {3.0}}, {1, 2, 3}, {true, true, true});
    const std::vector<double> beta{0.0};
    CHECK(cox_neg_partial_loglik(beta, data) == doctest::Approx(std::log(6.0)).epsilon(1e-12));
}

TEST_CASE("partial log-likelihood is invariant to a constant linear-predictor shift") {
    // Append an always-one feature: any coefficient on it cancels in the
    // risk ratios.
    const auto base = make_dataset({{0.5}, {-1.0}, {2.0}}, {3, 1, 2}, {true, false, true});
    const auto padded = make_dataset({{0.5, 1.0}, {-1.0, 1.0}, {2.0, 1.0}}, {3, 1, 2},
                                     {true, false, true});
    for (double c : {-2.0, 0.7, 5.0}) {
        const double a = cox_neg_partial_loglik(std::vector<double>{0.4}, base);
        const double b = cox_neg_partial_loglik(std::vector<double>{0.4, c}, padded);
        CHECK(a == doctest::Approx(b).epsilon(1e-10));
    }
}

TEST_CASE("two-record hand value") {
    const auto data = make_dataset({{1.0}, {2.0}}, {1, 2}, {true, true});
    const std::vector<double> beta{0.3};
    // Event at t=1 sees both subjects at risk, event at t=2 only itself:
    //   loss = -(0.3 - log(e^{0.3} + e^{0.6})) - (0.6 - log(e^{0.6}))
    const double expected = -(0.3 - std::log(std::exp(0.3) + std::exp(0.6)));
    CHECK(cox_neg_partial_loglik(beta, data) == doctest::Approx(expected).epsilon(1e-12));
}

TEST_CASE("loss requires at least one event") {
    const auto data = make_dataset({{1.0}}, {1}, {false});
    CHECK_THROWS_AS(cox_neg_partial_loglik(std::vector<double>{0.0}, data), ArgumentError);
    CHECK_THROWS_AS(cox_gradient(std::vector<double>{0.0}, data), ArgumentError);
}

TEST_CASE("analytic gradient matches central finite differences") {
    Rng rng(2718);
    for (int trial = 0; trial < 100; ++trial) {
        const SurvivalDataset data = random_cox_dataset(rng);
        std::vector<double> beta(data.feature_count());
        for (auto& b : beta) b = rng.uniform01() - 0.5;

        const auto analytic = cox_gradient(beta, data);
        const auto numeric = fd_gradient(beta, data);
        for (std::size_t j = 0; j < beta.size(); ++j) {
            const double scale = std::max(1.0, std::abs(numeric[j]));
            CHECK(std::abs(analytic[j] - numeric[j]) / scale < 1e-5);
        }
    }
}

TEST_CASE("gradient is zero for a single-record dataset") {
    const auto data = make_dataset({{3.0, -1.0}}, {5}, {true});
    for (double b : {-1.0, 0.0, 2.5}) {
        const auto grad = cox_gradient(std::vector<double>{b, -b}, data);
        CHECK(grad[0] == 0.0);
        CHECK(grad[1] == 0.0);
    }
}

TEST_CASE("a constant feature column has zero gradient everywhere") {
    const auto data = make_dataset({{0.2, 7.0}, {1.5, 7.0}, {-0.3, 7.0}}, {2, 5, 3},
                                   {true, true, false});
    Rng rng(12);
    for (int trial = 0; trial < 10; ++trial) {
        const std::vector<double> beta{rng.uniform01() - 0.5, rng.uniform01() - 0.5};
        const auto grad = cox_gradient(beta, data);
        CHECK(grad[1] == doctest::Approx(0.0).epsilon(1e-12));
    }
}

TEST_CASE("fit_cox_local learns the sign of a positive association") {
    // Feature 0 of the synthetic generator carries a positive coefficient:
    // larger x0 means a higher event rate, so earlier events.
    const auto raw = generate_synthetic(400, 3, 0.0, 123);
    const Standardizer scaler = Standardizer::fit(raw);
    const std::vector<double> beta = fit_cox_local(scaler.transform(raw), 0.05, 200);
    CHECK(beta[0] > 0.1);
    CHECK(beta[1] < 0.0);  // second true coefficient is negative
}

TEST_CASE("fit_cox_local with zero epochs returns beta zero") {
    const auto data = make_dataset({{1.0}, {0.0}}, {1, 2}, {true, true});
    const auto beta = fit_cox_local(data, 0.01, 0);
    CHECK(beta == std::vector<double>{0.0});
}

TEST_CASE("fit_cox_local never increases the loss") {
    Rng rng(4242);
    for (int trial = 0; trial < 10; ++trial) {
        const SurvivalDataset raw = random_cox_dataset(rng, 40, 3);
        const SurvivalDataset data = Standardizer::fit(raw).transform(raw);
        const std::vector<double> zero(data.feature_count(), 0.0);
        const double initial = cox_neg_partial_loglik(zero, data);
        for (std::size_t epochs : {1u, 5u, 25u}) {
            const auto beta = fit_cox_local(data, 0.5, epochs);
            CHECK(cox_neg_partial_loglik(beta, data) <= initial + 1e-12);
        }
    }
}

TEST_CASE("fit_cox_local is invariant to record order") {
    const auto raw = generate_synthetic(60, 2, 0.2, 9);  // continuous times, no ties
    const Standardizer scaler = Standardizer::fit(raw);
    const SurvivalDataset data = scaler.transform(raw);

    std::vector<std::size_t> perm(data.size());
    std::iota(perm.begin(), perm.end(), std::size_t{0});
    Rng rng(5);
    rng.shuffle(perm);
    const SurvivalDataset shuffled = data.subset(perm);

    const auto a = fit_cox_local(data, 0.05, 30);
    const auto b = fit_cox_local(shuffled, 0.05, 30);
    CHECK(a == b);
}

TEST_CASE("after enough descent the gradient norm is small") {
    const auto raw = generate_synthetic(80, 2, 0.0, 77);
    const SurvivalDataset data = Standardizer::fit(raw).transform(raw);
    const auto beta = fit_cox_local(data, 0.2, 3000);
    CHECK(norm2(cox_gradient(beta, data)) < 1e-4);
}

TEST_CASE("shared baseline hazard equals the pooled Nelson-Aalen estimate") {
    SUBCASE("single client") {
        const auto data = make_time_event_dataset({1, 2, 2, 5}, {true, false, true, true});
        const StepFunction merged = shared_baseline_hazard({data});
        const StepFunction direct = nelson_aalen(data);
        CHECK(merged.times() == direct.times());
        CHECK(merged.values() == direct.values());
    }
    SUBCASE("two clients with disjoint event times") {
        const auto a = make_time_event_dataset({1, 3}, {true, true});
        const auto b = make_time_event_dataset({2, 4}, {true, false});
        const StepFunction merged = shared_baseline_hazard({a, b});

        std::vector<double> times{1, 3, 2, 4};
        std::vector<bool> events{true, true, true, false};
        const StepFunction direct = nelson_aalen(make_time_event_dataset(times, events));
        CHECK(merged.times() == direct.times());
        CHECK(merged.values() == direct.values());
    }
    SUBCASE("fully censored clients give a zero baseline") {
        const auto a = make_time_event_dataset({1, 2}, {false, false});
        const auto b = make_time_event_dataset({3}, {false});
        const StepFunction merged = shared_baseline_hazard({a, b});
        CHECK(merged.size() == 0);
        CHECK(merged(10.0) == 0.0);
    }
    SUBCASE("random partitions, exact pooled equivalence") {
        Rng rng(31);
        for (int trial = 0; trial < 40; ++trial) {
            const auto pooled = random_time_event_dataset(rng, 40);
            const std::size_t k = 1 + rng.uniform_int(4);
            std::vector<std::vector<std::size_t>> parts(k);
            for (std::size_t i = 0; i < pooled.size(); ++i) {
                parts[rng.uniform_int(k)].push_back(i);
            }
            std::vector<SurvivalDataset> clients;
            for (const auto& idx : parts) {
                if (!idx.empty()) clients.push_back(pooled.subset(idx));
            }
            const StepFunction merged = shared_baseline_hazard(clients);
            const StepFunction direct = nelson_aalen(pooled);
            CHECK(merged.times() == direct.times());
            CHECK(merged.values() == direct.values());
        }
    }
}

TEST_CASE("fedavg with one client follows the local trajectory") {
    // 64-record shard: power-of-two sizes keep the weighted average exact.
    const auto shard = generate_synthetic(64, 2, 0.2, 55);
    auto [train, val] = local_split(shard, 0.2, 7);

    FedAvgConfig config;
    config.rounds = 20;
    config.local_epochs = 1;
    config.learning_rate = 0.05;
    const FedAvgResult result = fedavg_cox({{train, val}}, config, 1);

    // The same 20 steps, standardized with the same (single-client) stats.
    const SurvivalDataset std_train = Standardizer::fit_pooled({train}).transform(train);
    const auto expected = fit_cox_local(std_train, 0.05, 20);
    CHECK(result.final_beta == expected);

    // rounds x local_epochs composes the same way.
    config.rounds = 6;
    config.local_epochs = 3;
    const FedAvgResult stacked = fedavg_cox({{train, val}}, config, 1);
    CHECK(stacked.final_beta == fit_cox_local(std_train, 0.05, 18));
}

TEST_CASE("identical client shards reproduce the single-client trajectory") {
    const auto shard = generate_synthetic(32, 2, 0.2, 66);
    auto [train, val] = local_split(shard, 0.2, 3);

    FedAvgConfig config;
    config.rounds = 10;
    config.learning_rate = 0.05;
    const FedAvgResult two = fedavg_cox({{train, val}, {train, val}}, config, 1);
    const FedAvgResult one = fedavg_cox({{train, val}}, config, 1);
    // Equal up to float accumulation order in the pooled statistics.
    REQUIRE(two.final_beta.size() == one.final_beta.size());
    for (std::size_t j = 0; j < one.final_beta.size(); ++j) {
        CHECK(two.final_beta[j] == doctest::Approx(one.final_beta[j]).epsilon(1e-9));
    }
}

TEST_CASE("equal-size shards aggregate to the plain mean of client updates") {
    const auto a = generate_synthetic(32, 2, 0.2, 81);
    const auto b = generate_synthetic(32, 2, 0.2, 82);
    auto [train_a, val_a] = local_split(a, 0.25, 1);
    auto [train_b, val_b] = local_split(b, 0.25, 1);

    FedAvgConfig config;
    config.rounds = 1;
    config.learning_rate = 0.05;
    const FedAvgResult fed = fedavg_cox({{train_a, val_a}, {train_b, val_b}}, config, 5);

    // Replicate both single-round client updates under the pooled scaler.
    const Standardizer scaler = Standardizer::fit_pooled({train_a, train_b});
    const auto beta_a = fit_cox_local(scaler.transform(train_a), 0.05, 1);
    const auto beta_b = fit_cox_local(scaler.transform(train_b), 0.05, 1);
    for (std::size_t j = 0; j < 2; ++j) {
        CHECK(fed.final_beta[j] == doctest::Approx(0.5 * (beta_a[j] + beta_b[j])).epsilon(1e-15));
        CHECK(fed.final_beta[j] >= std::min(beta_a[j], beta_b[j]));
        CHECK(fed.final_beta[j] <= std::max(beta_a[j], beta_b[j]));
    }
}

TEST_CASE("fedavg is invariant to client order") {
    const auto a = generate_synthetic(40, 2, 0.2, 91);
    const auto b = generate_synthetic(56, 2, 0.2, 92);
    const auto c = generate_synthetic(32, 2, 0.2, 93);
    auto [ta, va] = local_split(a, 0.25, 1);
    auto [tb, vb] = local_split(b, 0.25, 1);
    auto [tc, vc] = local_split(c, 0.25, 1);

    FedAvgConfig config;
    config.rounds = 5;
    config.learning_rate = 0.05;
    const FedAvgResult fwd = fedavg_cox({{ta, va}, {tb, vb}, {tc, vc}}, config, 4);
    const FedAvgResult rev = fedavg_cox({{tc, vc}, {tb, vb}, {ta, va}}, config, 4);
    REQUIRE(fwd.final_beta.size() == rev.final_beta.size());
    for (std::size_t j = 0; j < fwd.final_beta.size(); ++j) {
        CHECK(fwd.final_beta[j] == doctest::Approx(rev.final_beta[j]).epsilon(1e-12));
    }
}

TEST_CASE("aggregation stays in the coordinatewise hull for unequal shards") {
    const auto a = generate_synthetic(48, 2, 0.2, 94);
    const auto b = generate_synthetic(96, 2, 0.2, 95);
    auto [ta, va] = local_split(a, 0.25, 1);
    auto [tb, vb] = local_split(b, 0.25, 1);

    FedAvgConfig config;
    config.rounds = 1;
    config.learning_rate = 0.05;
    const FedAvgResult fed = fedavg_cox({{ta, va}, {tb, vb}}, config, 6);

    const Standardizer scaler = Standardizer::fit_pooled({ta, tb});
    const auto beta_a = fit_cox_local(scaler.transform(ta), 0.05, 1);
    const auto beta_b = fit_cox_local(scaler.transform(tb), 0.05, 1);
    for (std::size_t j = 0; j < 2; ++j) {
        CHECK(fed.final_beta[j] >= std::min(beta_a[j], beta_b[j]) - 1e-12);
        CHECK(fed.final_beta[j] <= std::max(beta_a[j], beta_b[j]) + 1e-12);
    }
}

TEST_CASE("a partial client fraction still converges deterministically") {
    std::vector<CoxClient> clients;
    for (std::uint64_t s = 0; s < 4; ++s) {
        const auto shard = generate_synthetic(40, 2, 0.2, 70 + s);
        auto [t, v] = local_split(shard, 0.25, s);
        clients.push_back({std::move(t), std::move(v)});
    }
    FedAvgConfig config;
    config.rounds = 8;
    config.learning_rate = 0.05;
    config.client_fraction = 0.5;
    const FedAvgResult a = fedavg_cox(clients, config, 3);
    const FedAvgResult b = fedavg_cox(clients, config, 3);
    CHECK(a.final_beta == b.final_beta);

    config.client_fraction = 1.0;
    const FedAvgResult all = fedavg_cox(clients, config, 3);
    CHECK(a.final_beta != all.final_beta);  // different participation, different path
}

TEST_CASE("fedavg requires events on every client") {
    const auto good = make_dataset({{1.0}, {0.0}}, {1, 2}, {true, true});
    const auto bad = make_dataset({{1.0}, {0.0}}, {1, 2}, {false, false});
    FedAvgConfig config;
    config.rounds = 1;
    CHECK_THROWS_AS(fedavg_cox({{good, good}, {bad, good}}, config, 1), ArgumentError);
}

TEST_CASE("cox risk prediction") {
    CoxModel model;
    model.beta = {0.0, 0.0};
    model.baseline_cum_hazard = StepFunction({1.0}, {0.5}, 0.0);
    model.feature_means = {0.0, 0.0};

    SUBCASE("zero beta scores zero risk") {
        CHECK(cox_predict_risk(model, std::vector<double>{3.0, -2.0}) == 0.0);
    }
    SUBCASE("dimension mismatch throws") {
        CHECK_THROWS_AS(cox_predict_risk(model, std::vector<double>{1.0}), ArgumentError);
    }
}

TEST_CASE("scaling beta preserves the concordance ranking") {
    const auto data = generate_synthetic(150, 3, 0.2, 44);
    const Standardizer scaler = Standardizer::fit(data);
    const auto beta = fit_cox_local(scaler.transform(data), 0.05, 50);
    const CoxModel model = make_cox_model(beta, scaler, nelson_aalen(data));

    std::vector<double> scaled_beta = beta;
    for (auto& v : scaled_beta) v *= 3.7;
    const CoxModel scaled = make_cox_model(scaled_beta, scaler, nelson_aalen(data));

    std::vector<double> risks(data.size());
    std::vector<double> scaled_risks(data.size());
    for (std::size_t i = 0; i < data.size(); ++i) {
        risks[i] = cox_predict_risk(model, data[i].features);
        scaled_risks[i] = cox_predict_risk(scaled, data[i].features);
    }
    const StepFunction g = censoring_survival(data);
    const double c = concordance_index_ipcw(g, data, risks, 1e18);
    const double c_scaled = concordance_index_ipcw(g, data, scaled_risks, 1e18);
    CHECK(c == c_scaled);
}

TEST_CASE("survival curve composes the baseline with the exponential risk") {
    const auto data = generate_synthetic(50, 2, 0.2, 19);
    const Standardizer scaler = Standardizer::fit(data);
    const auto beta = fit_cox_local(scaler.transform(data), 0.05, 20);
    const StepFunction baseline = nelson_aalen(data);
    const CoxModel model = make_cox_model(beta, scaler, baseline);

    const auto& x = data[3].features;
    const StepFunction curve = cox_survival_curve(model, x);
    const double risk = std::exp(cox_predict_risk(model, x));
    for (double t : baseline.times()) {
        CHECK(curve(t) ==
              doctest::Approx(std::exp(-model.baseline_cum_hazard(t) * risk)).epsilon(1e-12));
    }
    CHECK(curve.is_survival());
}

TEST_CASE("folding the standardizer preserves the linear predictor") {
    const auto data = generate_synthetic(40, 3, 0.2, 8);
    const Standardizer scaler = Standardizer::fit(data);
    std::vector<double> beta{0.4, -0.2, 0.9};
    const CoxModel model = make_cox_model(beta, scaler, nelson_aalen(data));

    for (std::size_t i = 0; i < 10; ++i) {
        const auto& x = data[i].features;
        const double standardized_lp =
            std::inner_product(beta.begin(), beta.end(), scaler.transform(x).begin(), 0.0);
        const double folded_lp = cox_predict_risk(model, x);
        // The constant offset moved into the baseline values.
        const double offset = standardized_lp - folded_lp;
        const double offset0 = std::inner_product(beta.begin(), beta.end(),
                                                  scaler.transform(data[0].features).begin(), 0.0) -
                               cox_predict_risk(model, data[0].features);
        CHECK(offset == doctest::Approx(offset0).epsilon(1e-9));
    }
}

TEST_CASE("cox model JSON round trip") {
    CoxModel model;
    model.beta = {0.25, -1.5};
    model.baseline_cum_hazard = StepFunction({1.0, 4.0}, {0.1, 0.9}, 0.0);
    model.feature_means = {53.0, 2.0};
    const CoxModel back = CoxModel::from_json(model.to_json());
    CHECK(back.beta == model.beta);
    CHECK(back.baseline_cum_hazard == model.baseline_cum_hazard);
    CHECK(back.feature_means == model.feature_means);
}
