#pragma once

#include <stdexcept>
#include <string>

namespace gvf {

/// Base class for all library errors.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& what) : std::runtime_error(what) {}
};

/// Input value outside the mathematical domain (non-finite, out of range).
class DomainError : public Error {
public:
    using Error::Error;
};

/// Dimension or length mismatch between arguments.
class ShapeError : public Error {
public:
    using Error::Error;
};

/// Operation not supported for the given manifold or kernel family.
class CapabilityError : public Error {
public:
    using Error::Error;
};

/// Gauge field singular or otherwise unusable at a point.
class GaugeError : public Error {
public:
    using Error::Error;
};

/// Cholesky factorization failed after exhausting the jitter ladder.
class ConditioningError : public Error {
public:
    ConditioningError(const std::string& what, double smallest_eigenvalue)
        : Error(what), smallest_eigenvalue(smallest_eigenvalue) {}
    double smallest_eigenvalue;
};

/// Optimizer produced a non-finite objective.
class OptimizationError : public Error {
public:
    OptimizationError(const std::string& what, int step)
        : Error(what), step(step) {}
    int step;
};

/// Malformed input file.
class FormatError : public Error {
public:
    FormatError(const std::string& what, long row = -1) : Error(what), row(row) {}
    long row;
};

/// Invalid variational or posterior state.
class StateError : public Error {
public:
    using Error::Error;
};

/// Trajectory left the finite domain during integration.
class DivergenceError : public Error {
public:
    DivergenceError(const std::string& what, long step) : Error(what), step(step) {}
    long step;
};

/// Filesystem failure, path attached to the message.
class IoError : public Error {
public:
    using Error::Error;
};

}  // namespace gvf
