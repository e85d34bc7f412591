#pragma once

#include <stdexcept>
#include <string>

namespace phantom {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A parameter set or configuration violates its invariants.
class InvalidParameter : public Error {
 public:
  using Error::Error;
};

/// An operation was evaluated outside its domain of definition
/// (singular locus, outside a chart overlap, missing intersections, ...).
class DomainError : public Error {
 public:
  using Error::Error;
};

/// An iterative method failed to converge (Newton, step-size control,
/// fixed-point iteration, continuation).
class ConvergenceError : public Error {
 public:
  using Error::Error;
};

}  // namespace phantom
