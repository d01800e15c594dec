#pragma once

#include <stdexcept>
#include <string>

namespace noisysgd {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Operand shapes do not chain (matrix-vector, network-input, gradient-network).
class ShapeError : public Error {
 public:
  using Error::Error;
};

/// A precondition on a scalar argument failed (lo >= hi, n == 0, empty dataset...).
class InvalidArgument : public Error {
 public:
  using Error::Error;
};

/// Malformed external input: IDX files, network files, configs, CSVs.
class FormatError : public Error {
 public:
  using Error::Error;
};

/// Training produced a non-finite value.
class NumericError : public Error {
 public:
  using Error::Error;
};

}  // namespace noisysgd
