#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace adpm {

/// Base of every exception thrown by the library.
class Error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// Input data or arguments violate a documented contract. The CLI maps
/// this family to exit code 2.
class ValidationError : public Error {
public:
  using Error::Error;
};

/// A byte stream does not follow the expected container layout.
class FormatError : public ValidationError {
public:
  using ValidationError::ValidationError;
};

/// A spatial-pyramid grid cannot be laid over a map of the given size.
class UnsupportedSizeError : public ValidationError {
public:
  using ValidationError::ValidationError;
};

/// Too few samples to fit the requested model.
class InsufficientDataError : public ValidationError {
public:
  using ValidationError::ValidationError;
};

/// k-means cannot produce the requested number of distinct centers.
class DegenerateClusteringError : public ValidationError {
public:
  using ValidationError::ValidationError;
};

/// Read or write failure on a byte stream. Carries the stream offset at
/// which the failure was detected.
class IoError : public Error {
public:
  IoError(const std::string& what, std::uint64_t offset)
      : Error(what + " (at byte offset " + std::to_string(offset) + ")"),
        offset_(offset) {}

  std::uint64_t offset() const noexcept { return offset_; }

private:
  std::uint64_t offset_;
};

}  // namespace adpm
