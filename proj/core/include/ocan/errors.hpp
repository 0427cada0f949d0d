#pragma once

#include <stdexcept>
#include <string>

namespace ocan {

// Base of every error raised by the library. Callers that only care about
// "something went wrong" catch this; the CLI maps subclasses to exit codes.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Operand shapes do not conform.
class ShapeError : public Error {
 public:
  using Error::Error;
};

// NaN/Inf produced, log of a non-positive value, divergence during training.
class NumericError : public Error {
 public:
  using Error::Error;
};

// Bad arguments: empty batches, invalid hyperparameters, out-of-order streams.
class ArgumentError : public Error {
 public:
  using Error::Error;
};

// Malformed dataset files; messages carry row numbers or user ids.
class ParseError : public Error {
 public:
  using Error::Error;
};

// Unreadable, corrupt or mutually incompatible checkpoints.
class CheckpointError : public Error {
 public:
  using Error::Error;
};

// Missing files, failed writes.
class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace ocan
