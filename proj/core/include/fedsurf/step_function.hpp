#pragma once

#include <cstddef>
#include <vector>

namespace fedsurf {

// Right-continuous piecewise-constant function of time.
//
// Holds survival curves S(t), cumulative hazards H(t) and censoring
// distributions G(t). Only the jump points are stored; evaluation between
// points is constant, so the representation is exact.
class StepFunction {
public:
    StepFunction() : initial_(0.0) {}

    // times must be strictly increasing and the same length as values.
    StepFunction(std::vector<double> times, std::vector<double> values, double initial_value);

    // Value at t: the stored value of the last jump point <= t, or
    // initial_value if t precedes every jump.
    double operator()(double t) const;

    // Left limit at t: the value just before t (last jump point < t).
    double left_limit(double t) const;

    const std::vector<double>& times() const { return times_; }
    const std::vector<double>& values() const { return values_; }
    double initial_value() const { return initial_; }
    std::size_t size() const { return times_.size(); }

    // Survival curve: starts at 1, non-increasing, values in [0, 1].
    bool is_survival() const;
    // Cumulative hazard: starts at 0, non-decreasing, values >= 0.
    bool is_cumulative_hazard() const;

    bool operator==(const StepFunction& other) const = default;

private:
    std::vector<double> times_;
    std::vector<double> values_;
    double initial_;
};

// Pointwise exp(-H) on the same time grid. Throws if H is not a valid
// cumulative hazard.
StepFunction chf_to_survival(const StepFunction& chf);

}  // namespace fedsurf
