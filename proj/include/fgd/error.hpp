#pragma once

#include <stdexcept>
#include <string>

namespace fgd {

/// Base class for every error the library reports. Messages are single-line
/// and carry enough location (path, line, offset, query index) to act on.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Filesystem failure: missing file, unwritable path, short write.
class IoError : public Error {
 public:
  using Error::Error;
};

/// Malformed or corrupt file content.
class FormatError : public Error {
 public:
  using Error::Error;
};

/// A caller-supplied value violates an operation's precondition.
class InvalidArgument : public Error {
 public:
  using Error::Error;
};

/// Vector length does not match the dimension the index or projection expects.
class DimensionError : public InvalidArgument {
 public:
  using InvalidArgument::InvalidArgument;
};

}  // namespace fgd
