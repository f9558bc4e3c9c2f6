#pragma once

// Error taxonomy shared by all modules.  The CLI maps these onto exit codes:
// config 2, numerical 3, resource 4, refused-precondition 5.

#include <stdexcept>
#include <string>

namespace polystab {

class Error : public std::runtime_error {
public:
    explicit Error(const std::string &msg) : std::runtime_error(msg) {}
};

// Caller passed an argument outside the documented domain of an operation.
class InvalidArgument : public Error {
public:
    using Error::Error;
};

// Input shape is recognized but not handled by this operation (a different
// operation covers it).
class Unsupported : public InvalidArgument {
public:
    using InvalidArgument::InvalidArgument;
};

// A scenario configuration failed validation; message names the field.
class ConfigError : public Error {
public:
    using Error::Error;
};

// An algorithm failed to converge, bracketed roots were lost, a solve blew
// up, or a quantity left its admissible range mid-computation.
class NumericalError : public Error {
public:
    using Error::Error;
};

// alpha_j(omega) evaluated at omega^2 == lambda_j.
class PoleError : public NumericalError {
public:
    using NumericalError::NumericalError;
};

// Resolvent requested at an undamped resonance: omega^2 equals an eigenvalue
// whose eigenspace carries no damping, so (A - i omega)^{-1} is unbounded.
class ResonanceError : public NumericalError {
public:
    using NumericalError::NumericalError;
};

// Time integration produced non-finite state.
class Diverged : public NumericalError {
public:
    using NumericalError::NumericalError;
};

// An enumeration or exact-arithmetic computation exceeded its budget.
class ResourceLimit : public Error {
public:
    using Error::Error;
};

// A stated precondition does not hold for the given data; the operation
// refuses rather than returning a low-quality answer.
class PreconditionRefused : public Error {
public:
    using Error::Error;
};

// Fewer data points than the operation needs.
class InsufficientData : public PreconditionRefused {
public:
    using PreconditionRefused::PreconditionRefused;
};

// Requested quadrature resolution is below the documented floor.
class AccuracyRefused : public PreconditionRefused {
public:
    using PreconditionRefused::PreconditionRefused;
};

// The smallest eigenvalue of an eigenspace damping block is not positive:
// the nondegeneracy constant 1/beta_k fails and i*R may meet the spectrum.
class DegenerateDamping : public PreconditionRefused {
public:
    using PreconditionRefused::PreconditionRefused;
};

} // namespace polystab
