#pragma once

#include <stdexcept>
#include <string>

#include "phase_state.hpp"

namespace iduff {

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Malformed input document.
class ParseError : public Error {
public:
    using Error::Error;
};

/// Input parsed but violates a documented invariant; the message names it.
class ValidationError : public Error {
public:
    using Error::Error;
};

/// A caller broke an operation's precondition.
class PreconditionError : public Error {
public:
    using Error::Error;
};

class IoError : public Error {
public:
    using Error::Error;
};

class NumericalError : public Error {
public:
    using Error::Error;
};

/// An iterative solve stopped without meeting its tolerance.
class ConvergenceError : public NumericalError {
public:
    ConvergenceError(const std::string& what, double best_residual)
        : NumericalError(what + " (best residual " + std::to_string(best_residual) + ")"),
          best_residual_(best_residual) {}
    double best_residual() const { return best_residual_; }

private:
    double best_residual_;
};

/// The trajectory left the escape guard or the step size underflowed.
class EscapeError : public NumericalError {
public:
    EscapeError(const std::string& what, PhaseState last) : NumericalError(what), last_(last) {}
    const PhaseState& last_state() const { return last_; }

private:
    PhaseState last_;
};

/// The trajectory came too close to the origin, where the action-angle chart is undefined.
class OriginGuardError : public NumericalError {
public:
    using NumericalError::NumericalError;
};

} // namespace iduff
