#pragma once

#include <stdexcept>
#include <string>

namespace foliate {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Invalid input, configuration or file contents. Raised before any heavy
/// computation starts.
class ValidationError : public Error {
 public:
  using Error::Error;
};

/// A numerical procedure failed: singular systems, divergence, unresolved
/// spectra.
class NumericalError : public Error {
 public:
  using Error::Error;
};

}  // namespace foliate
