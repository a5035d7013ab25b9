#pragma once

#include <stdexcept>

namespace fpr {

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Bad dimensions, malformed files, invalid configuration.
struct InvalidInputError : Error {
  using Error::Error;
};

// A ratio or logarithm was requested at a zero denominator/argument,
// e.g. bang-per-buck at a zero price.
struct NumericDomainError : Error {
  using Error::Error;
};

// An activated buyer has zero utility; the proportional response update
// divides by u_i and is undefined there.
struct DegenerateStateError : Error {
  using Error::Error;
};

}  // namespace fpr
