// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <stdexcept>
#include <string>

namespace fraudtext {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Operand shapes do not agree.
class ShapeError : public Error {
 public:
  using Error::Error;
};

/// An integer index (token id, position) is out of range.
class IndexError : public Error {
 public:
  using Error::Error;
};

/// A scalar argument is outside its legal domain (rates, fractions, sizes).
class ParameterError : public Error {
 public:
  using Error::Error;
};

/// Empty or otherwise unusable data handed to a data-consuming operation.
class DataError : public Error {
 public:
  using Error::Error;
};

/// Training produced a non-finite loss.
class DivergenceError : public Error {
 public:
  using Error::Error;
};

/// A metric is undefined for its input, e.g. AUC on single-class labels.
class MetricError : public Error {
 public:
  using Error::Error;
};

/// Invalid configuration: unknown model name, impossible generator counts.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Malformed text input; the message carries the location.
class ParseError : public Error {
 public:
  using Error::Error;
};

/// A binary container failed its version, length, shape or checksum audit.
class IntegrityError : public Error {
 public:
  using Error::Error;
};

class VersionError : public IntegrityError {
 public:
  using IntegrityError::IntegrityError;
};

}  // namespace fraudtext
