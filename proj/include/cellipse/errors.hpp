#pragma once

#include <stdexcept>
#include <string>

namespace cellipse {

/// Base of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// File could not be opened, read or written.
class IoError : public Error {
 public:
  using Error::Error;
};

/// Input bytes are not a supported or well-formed raster.
class FormatError : public Error {
 public:
  using Error::Error;
};

/// Input cannot be clustered (fewer distinct colours than clusters).
class DegenerateInputError : public Error {
 public:
  using Error::Error;
};

/// No ellipse can be fitted to a point set.
class FitFailure : public Error {
 public:
  using Error::Error;
};

/// Argument outside the domain of an operation.
class DomainError : public Error {
 public:
  using Error::Error;
};

/// Scene generator could not place a cell.
class CapacityError : public Error {
 public:
  using Error::Error;
};

/// Malformed configuration or scene-spec file.
class ConfigError : public Error {
 public:
  using Error::Error;
};

}  // namespace cellipse
