#pragma once

#include <stdexcept>
#include <string>

namespace homq {

// Bad user-facing input: non-finite matrices, out-of-range angles,
// inconsistent dimensions, unparsable configs.
struct InvalidInput : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

// The iterative LMI solver exhausted its budget without reaching the
// required margins. Carries the best margin found so callers can report it.
struct Infeasible : std::runtime_error {
    Infeasible(const std::string& msg, double best) : std::runtime_error(msg), best_margin(best) {}
    double best_margin;
};

// Trajectory left the numerical trust region (bad certificate or blow-up).
struct Divergence : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// An operation that requires a certified pair was given an uncertified one.
struct NotCertified : std::runtime_error {
    using std::runtime_error::runtime_error;
};

}  // namespace homq
