#pragma once

#include <stdexcept>
#include <string>

namespace dbcf {

/// Base class for all toolkit errors.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Shape or channel-count mismatch between operands.
class DimensionError : public Error {
 public:
  using Error::Error;
};

/// A value violates an operation's precondition.
class ArgumentError : public Error {
 public:
  using Error::Error;
};

/// A linear system or other numeric step could not be completed.
class NumericError : public Error {
 public:
  using Error::Error;
};

/// Malformed file content (bad magic, bad groundtruth line, ...).
class FormatError : public Error {
 public:
  using Error::Error;
};

/// Filesystem-level failure; message names the offending path.
class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace dbcf
