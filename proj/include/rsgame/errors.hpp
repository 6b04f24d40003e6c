#pragma once

#include <stdexcept>
#include <string>

namespace rsgame {

/// Base class for all solver failures that are mathematical rather than I/O.
struct SolverError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// A definiteness condition failed at a grid node. Usually means the
/// attenuation level gamma is below the solvability threshold.
struct ConditionViolation : SolverError {
    double s;
    int regime;       // 1-based, as reported to users
    double margin;    // eigenvalue margin that failed (>= delta required)
    std::string condition;

    ConditionViolation(double s_, int regime_, double margin_, std::string cond)
        : SolverError("condition " + cond + " violated at s=" + std::to_string(s_) +
                      ", regime " + std::to_string(regime_) +
                      ", margin " + std::to_string(margin_)),
          s(s_), regime(regime_), margin(margin_), condition(std::move(cond)) {}
};

/// Backward integration produced NaN or Inf (finite-time blow-up).
struct NonFiniteValue : SolverError {
    double s;
    int regime;
    NonFiniteValue(double s_, int regime_)
        : SolverError("non-finite value at s=" + std::to_string(s_) +
                      ", regime " + std::to_string(regime_)),
          s(s_), regime(regime_) {}
};

/// A block of the stacked weight matrix could not be factorized.
struct SingularRhat : SolverError {
    using SolverError::SolverError;
};

/// The disturbance policy has no computable conditional expectation.
struct UnsupportedDisturbance : SolverError {
    using SolverError::SolverError;
};

/// Bisection preconditions could not be established.
struct NoBracket : SolverError {
    double lo, hi;
    NoBracket(double lo_, double hi_)
        : SolverError("no solvability bracket in [" + std::to_string(lo_) + ", " +
                      std::to_string(hi_) + "]"),
          lo(lo_), hi(hi_) {}
};

/// Scenario file could not be parsed or fails the schema.
struct ScenarioError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

}  // namespace rsgame
