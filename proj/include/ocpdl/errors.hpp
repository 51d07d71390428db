#pragma once

#include <stdexcept>
#include <string>

namespace ocpdl {

// Base class for all library errors.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Dimension mismatches, out-of-range modes, invalid shapes.
struct ShapeError : Error {
  using Error::Error;
};

// Non-finite values produced where finiteness is required.
struct NumericError : Error {
  using Error::Error;
};

// Dictionary with zero Gram trace handed to the coding step.
struct DegenerateDictionaryError : Error {
  using Error::Error;
};

// Transition matrix whose support is not strongly connected.
struct ReducibleChainError : Error {
  using Error::Error;
};

// File-format violations and unreadable/unwritable paths.
struct IoError : Error {
  using Error::Error;
};

// Invalid run configuration (bad flags, malformed config files).
struct ConfigError : Error {
  using Error::Error;
};

}  // namespace ocpdl
