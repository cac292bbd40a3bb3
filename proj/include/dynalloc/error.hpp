#pragma once

#include <stdexcept>
#include <string>

namespace dynalloc {

/// Base class for every error raised by the library. Messages name the
/// offending input so CLI users can act on them directly.
class Error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// Raised when a return series has no dispersion and a ratio against its
/// volatility is requested.
class ZeroVolatilityError : public Error {
public:
  using Error::Error;
};

/// Raised when a portfolio value would become non-positive.
class RuinError : public Error {
public:
  using Error::Error;
};

/// Raised when a numerical routine produces NaN or infinity.
class NonFiniteError : public Error {
public:
  using Error::Error;
};

}  // namespace dynalloc
