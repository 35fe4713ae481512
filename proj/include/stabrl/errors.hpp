#pragma once

#include <stdexcept>
#include <string>

namespace stabrl {

// Base for every error raised by the library. Callers that only care about
// "something went wrong in a run" catch this one.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Bad arguments: dimension mismatch, non-positive gains, malformed configs.
class InputError : public Error {
 public:
  using Error::Error;
};

// Output file or directory could not be written.
class IoError : public Error {
 public:
  using Error::Error;
};

// Model construction rejected (e.g. no stabilizing Riccati root).
class ModelError : public Error {
 public:
  using Error::Error;
};

// Operation not valid for the object's current state (e.g. empty buffer).
class StateError : public Error {
 public:
  using Error::Error;
};

// Stepping a stochastic model with a deterministic integrator.
class WrongIntegratorError : public Error {
 public:
  using Error::Error;
};

// Operation needs ground truth (known value, optimal policy) or a cost
// structure the model does not provide.
class UnsupportedError : public Error {
 public:
  using Error::Error;
};

// Persistence of excitation could not be reached or was lost.
class ExcitationError : public Error {
 public:
  ExcitationError(const std::string& what, double lambda_min)
      : Error(what), lambda_min_(lambda_min) {}
  double lambda_min() const { return lambda_min_; }

 private:
  double lambda_min_;
};

// Non-finite values appeared while integrating.
class DivergenceError : public Error {
 public:
  using Error::Error;
};

}  // namespace stabrl
