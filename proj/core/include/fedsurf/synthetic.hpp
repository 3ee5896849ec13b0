#pragma once

#include <cstdint>
#include <vector>

#include "fedsurf/dataset.hpp"

namespace fedsurf {

// Ground-truth coefficients of the synthetic generator: alternating sign,
// shrinking magnitude, beta[0] > 0 so higher x0 means earlier events.
std::vector<double> synthetic_true_beta(std::size_t d);

// Test fixture: standard-normal features, exponential event times with
// log-linear rate exp(<beta, x>), independent uniform censoring tuned by
// bisection so the expected censored fraction equals censor_rate.
SurvivalDataset generate_synthetic(std::size_t n, std::size_t d, double censor_rate,
                                   std::uint64_t seed);

}  // namespace fedsurf
