#pragma once

#include <stdexcept>
#include <string>

namespace cowqkd {

/// A dense operator would exceed the configured dimension ceiling.
class CapacityError : public std::length_error {
 public:
  using std::length_error::length_error;
};

/// Caller passed an argument outside the operation's domain.
class ArgumentError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// A numerical routine failed (eigen-solver, factorization, ...).
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Constraint data admits no feasible point.
class InfeasibleError : public NumericError {
 public:
  using NumericError::NumericError;
};

}  // namespace cowqkd
