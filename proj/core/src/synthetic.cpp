#include "fedsurf/synthetic.hpp"

#include <cmath>
#include <string>

#include "fedsurf/errors.hpp"
#include "fedsurf/rng.hpp"

namespace fedsurf {

std::vector<double> synthetic_true_beta(std::size_t d) {
    std::vector<double> beta(d);
    for (std::size_t j = 0; j < d; ++j) {
        const double sign = (j % 2 == 0) ? 1.0 : -1.0;
        beta[j] = sign * 0.8 / (1.0 + 0.5 * static_cast<double>(j));
    }
    return beta;
}

SurvivalDataset generate_synthetic(std::size_t n, std::size_t d, double censor_rate,
                                   std::uint64_t seed) {
    if (n < 1) throw ArgumentError("generate_synthetic: n must be at least 1");
    if (d < 1) throw ArgumentError("generate_synthetic: d must be at least 1");
    if (!(censor_rate >= 0.0 && censor_rate < 1.0)) {
        throw ArgumentError("generate_synthetic: censor_rate must lie in [0, 1)");
    }

    Rng rng = Rng(seed).derive(streams::kSynthetic);
    const std::vector<double> beta = synthetic_true_beta(d);

    std::vector<std::vector<double>> features(n, std::vector<double>(d));
    std::vector<double> rate(n);
    std::vector<double> event_time(n);
    for (std::size_t i = 0; i < n; ++i) {
        double lp = 0.0;
        for (std::size_t j = 0; j < d; ++j) {
            features[i][j] = rng.normal();
            lp += beta[j] * features[i][j];
        }
        rate[i] = std::exp(lp);
        event_time[i] = rng.exponential() / rate[i];
    }

    // Uniform(0, b) censoring: P(C < T) = mean_i (1 - e^{-rate_i b}) / (rate_i b),
    // monotone decreasing in b, so the target rate pins b by bisection.
    double censor_bound = 0.0;
    if (censor_rate > 0.0) {
        auto censored_probability = [&](double b) {
            double acc = 0.0;
            for (std::size_t i = 0; i < n; ++i) {
                const double rb = rate[i] * b;
                acc += rb > 1e-12 ? (1.0 - std::exp(-rb)) / rb : 1.0;
            }
            return acc / static_cast<double>(n);
        };
        double lo = 1e-9;
        double hi = 1.0;
        while (censored_probability(hi) > censor_rate && hi < 1e12) hi *= 2.0;
        for (int iter = 0; iter < 200; ++iter) {
            const double mid = 0.5 * (lo + hi);
            if (censored_probability(mid) > censor_rate) {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        censor_bound = 0.5 * (lo + hi);
    }

    FeatureSchema schema;
    for (std::size_t j = 0; j < d; ++j) {
        schema.features.push_back({"x" + std::to_string(j), FeatureKind::Numerical, {}});
    }
    schema.time_column = "time";
    schema.event_column = "event";

    std::vector<SurvivalRecord> rows(n);
    for (std::size_t i = 0; i < n; ++i) {
        rows[i].features = std::move(features[i]);
        if (censor_rate == 0.0) {
            rows[i].event = true;
            rows[i].time = event_time[i];
        } else {
            const double censor_time = censor_bound * rng.uniform01();
            rows[i].event = event_time[i] <= censor_time;
            rows[i].time = rows[i].event ? event_time[i] : censor_time;
        }
    }
    return SurvivalDataset(std::move(rows), std::move(schema));
}

}  // namespace fedsurf
