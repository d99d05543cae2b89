#pragma once

#include <stdexcept>
#include <string>

namespace girl {

/// Base class of every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Operands have incompatible dimensions.
class ShapeError : public Error {
public:
    using Error::Error;
};

/// Input violates a documented precondition (stochasticity, ranges, ...).
class ValidationError : public Error {
public:
    using Error::Error;
};

/// A numerical routine failed to converge or hit an internal guard.
class NumericalError : public Error {
public:
    using Error::Error;
};

/// Unknown transition entries lie in a row selected by the policy, so the
/// optimality conditions are no longer linear in the unknowns.
class NonlinearCoupling : public Error {
public:
    using Error::Error;
};

/// Every enumerated policy led to an infeasible subproblem.
class NoFeasibleExplanation : public Error {
public:
    using Error::Error;
};

namespace detail {

inline void require(bool condition, const char* message) {
    if (!condition) throw ValidationError(message);
}

inline void require(bool condition, const std::string& message) {
    if (!condition) throw ValidationError(message);
}

inline void require_shape(bool condition, const char* message) {
    if (!condition) throw ShapeError(message);
}

inline void require_shape(bool condition, const std::string& message) {
    if (!condition) throw ShapeError(message);
}

} // namespace detail
} // namespace girl
