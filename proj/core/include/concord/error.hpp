#pragma once

#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>

namespace concord {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed input at a given 1-based line (JSONL) or row (TSV).
class ParseError : public Error {
 public:
  ParseError(std::size_t line, const std::string& message);
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

/// Input parsed fine but violates a domain invariant.
class ValidationError : public Error {
 public:
  using Error::Error;
};

/// Predictions and gold pairs do not cover the same pair ids.
class CoverageError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

/// A split request that would leave a requested partition without one class.
class StratificationError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

/// An operation needs more items than it was given.
class EmptyDomainError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

/// A revision no longer applies to the corpus it is replayed against.
class ConflictError : public ValidationError {
 public:
  ConflictError(std::uint64_t rev_id, const std::string& message);
  std::uint64_t rev_id() const noexcept { return rev_id_; }

 private:
  std::uint64_t rev_id_;
};

/// Operation not allowed in the current round state.
class StateError : public Error {
 public:
  using Error::Error;
};

/// A classifier backend could not be reached or answered badly.
class TransportError : public Error {
 public:
  using Error::Error;
};

/// The backend answered but refused the request or returned garbage.
class BackendError : public Error {
 public:
  using Error::Error;
};

}  // namespace concord
