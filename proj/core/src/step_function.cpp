#include "fedsurf/step_function.hpp"

#include <algorithm>
#include <cmath>

#include "fedsurf/errors.hpp"

namespace fedsurf {

StepFunction::StepFunction(std::vector<double> times, std::vector<double> values,
                           double initial_value)
    : times_(std::move(times)), values_(std::move(values)), initial_(initial_value) {
    if (times_.size() != values_.size()) {
        throw ArgumentError("StepFunction: times and values must have equal length");
    }
    for (std::size_t i = 0; i + 1 < times_.size(); ++i) {
        if (!(times_[i] < times_[i + 1])) {
            throw ArgumentError("StepFunction: times must be strictly increasing");
        }
    }
    for (double t : times_) {
        if (!std::isfinite(t)) throw ArgumentError("StepFunction: times must be finite");
    }
}

double StepFunction::operator()(double t) const {
    auto it = std::upper_bound(times_.begin(), times_.end(), t);
    if (it == times_.begin()) return initial_;
    return values_[static_cast<std::size_t>(it - times_.begin()) - 1];
}

double StepFunction::left_limit(double t) const {
    auto it = std::lower_bound(times_.begin(), times_.end(), t);
    if (it == times_.begin()) return initial_;
    return values_[static_cast<std::size_t>(it - times_.begin()) - 1];
}

bool StepFunction::is_survival() const {
    if (initial_ != 1.0) return false;
    double prev = initial_;
    for (double v : values_) {
        if (v < 0.0 || v > prev) return false;
        prev = v;
    }
    return true;
}

bool StepFunction::is_cumulative_hazard() const {
    if (initial_ != 0.0) return false;
    double prev = initial_;
    for (double v : values_) {
        if (!(v >= prev) || !std::isfinite(v)) return false;
        prev = v;
    }
    return true;
}

StepFunction chf_to_survival(const StepFunction& chf) {
    if (!chf.is_cumulative_hazard()) {
        throw ArgumentError("chf_to_survival: input is not a valid cumulative hazard");
    }
    std::vector<double> values(chf.size());
    for (std::size_t i = 0; i < chf.size(); ++i) {
        values[i] = std::exp(-chf.values()[i]);
    }
    return StepFunction(chf.times(), std::move(values), 1.0);
}

}  // namespace fedsurf
