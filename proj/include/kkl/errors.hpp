#pragma once

#include <limits>
#include <stdexcept>
#include <string>

namespace kkl {

/// Raised when an argument violates an operation's precondition.
class InputError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Raised when a quadrature fails to reach its tolerance. Carries the best
/// value obtained so far and the error estimate that accompanied it.
class NumericError : public std::runtime_error {
public:
    NumericError(const std::string& what, double partial, double estimate)
        : std::runtime_error(what), partial_(partial), estimate_(estimate) {}

    double partial_value() const noexcept { return partial_; }
    double error_estimate() const noexcept { return estimate_; }

private:
    double partial_;
    double estimate_;
};

inline constexpr double kInf = std::numeric_limits<double>::infinity();

inline void require(bool condition, const std::string& message) {
    if (!condition) throw InputError(message);
}

}  // namespace kkl
