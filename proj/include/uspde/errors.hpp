#pragma once

#include <stdexcept>
#include <string>

namespace uspde {

// Base class for all solver errors so callers can catch one type.
class Error : public std::runtime_error {
public:
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// Bad sizes, out-of-range lambda, mismatched bases, and similar caller mistakes.
class InvalidArgument : public Error {
public:
  explicit InvalidArgument(const std::string& msg) : Error(msg) {}
};

// A factorization hit a diagonal entry below the singularity threshold.
class SingularMatrix : public Error {
public:
  explicit SingularMatrix(const std::string& msg) : Error(msg) {}
};

// A time step could not be completed (e.g. Newton failed to converge).
class StepperFailure : public Error {
public:
  explicit StepperFailure(const std::string& msg) : Error(msg) {}
};

// Grid doubling hit its cap without the sampled function reaching a plateau.
class ResolutionFailure : public Error {
public:
  explicit ResolutionFailure(const std::string& msg) : Error(msg) {}
};

// The trailing boundary re-determination block was singular.
class BoundaryCorrectionFailure : public Error {
public:
  explicit BoundaryCorrectionFailure(const std::string& msg) : Error(msg) {}
};

// A pole of a rational approximation collided with the spectrum shift.
class PoleCollision : public Error {
public:
  explicit PoleCollision(const std::string& msg) : Error(msg) {}
};

// Malformed run configuration (CLI / JSON level).
class ConfigError : public Error {
public:
  explicit ConfigError(const std::string& msg) : Error(msg) {}
};

// A dense numerical kernel (e.g. an eigensolver) failed to converge.
class NumericalFailure : public Error {
public:
  explicit NumericalFailure(const std::string& msg) : Error(msg) {}
};

}  // namespace uspde
