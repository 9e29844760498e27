#pragma once

#include <stdexcept>
#include <string>

namespace imb {

// Base of every exception thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Bad input: malformed files, out-of-range parameters, violated preconditions.
class ValidationError : public Error {
 public:
  using Error::Error;
};

// Numerical or solver failure at run time.
class SolverError : public Error {
 public:
  using Error::Error;
};

}  // namespace imb
