#ifndef ROMFORGE_ERRORS_HPP
#define ROMFORGE_ERRORS_HPP

#include <stdexcept>
#include <string>
#include <vector>

namespace romforge {

/// Base class for all romforge failures.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

class InvalidArgumentError : public Error {
public:
    using Error::Error;
};

/// Reference field has zero norm in a relative-error computation.
class DegenerateReferenceError : public Error {
public:
    using Error::Error;
};

class IoError : public Error {
public:
    using Error::Error;
};

class ConfigError : public Error {
public:
    using Error::Error;
};

/// Parametric coordinate outside the knot range.
class OutOfDomainError : public Error {
public:
    using Error::Error;
};

/// Mesh deformation produced a tangled (non-positive volume) cell.
class InvalidDeformationError : public Error {
public:
    using Error::Error;
};

/// Iterative linear solver failed to reach tolerance. Carries the
/// residual-norm history of the failed solve.
class SolverFailureError : public Error {
public:
    SolverFailureError(const std::string& msg, std::vector<double> residuals)
        : Error(msg), residual_history(std::move(residuals)) {}
    std::vector<double> residual_history;
};

/// A time step could not satisfy the divergence tolerance.
class StepFailureError : public Error {
public:
    StepFailureError(const std::string& msg, double time)
        : Error(msg), time(time) {}
    double time;
};

/// Training loss became non-finite.
class DivergenceError : public Error {
public:
    DivergenceError(const std::string& msg, int epoch)
        : Error(msg), epoch(epoch) {}
    int epoch;
};

class NumericError : public Error {
public:
    using Error::Error;
};

} // namespace romforge

#endif
