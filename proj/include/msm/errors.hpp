#pragma once

#include <cstdio>
#include <stdexcept>
#include <string>

namespace msm {

// Input outside the domain of an operation (bad H, bad parameter set, ...).
struct DomainError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

// The requested estimator does not apply to the regime of the supplied H.
struct RegimeError : DomainError {
    using DomainError::DomainError;
};

// An inner product that must be positive (pilot ratio, debiased ratio) was not.
struct NonPositiveStatistic : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct DegenerateDenominator : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct NotPositiveDefinite : std::runtime_error {
    NotPositiveDefinite(const std::string& what, long pivot_index)
        : std::runtime_error(what + " (pivot " + std::to_string(pivot_index) + ")"), pivot(pivot_index) {}
    long pivot;
};

struct QuadratureError : std::runtime_error {
    QuadratureError(const std::string& what, double achieved)
        : std::runtime_error(what + " (achieved error " + format(achieved) + ")"), achieved_error(achieved) {}
    double achieved_error;

private:
    static std::string format(double v) {
        char buf[32];
        std::snprintf(buf, sizeof(buf), "%.3g", v);
        return buf;
    }
};

// Two representations of the same quantity disagree beyond their stated bounds.
struct ConsistencyError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct FormatError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

}  // namespace msm
