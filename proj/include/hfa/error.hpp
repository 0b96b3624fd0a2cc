#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace hfa {

/// Base class for all errors raised by this library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed input: duplicate labels, out-of-range indices, ragged files,
/// inconsistent dimensions. Distinct from constraint violations, which are
/// reported as data (see ValidationReport).
class StructuralError : public Error {
 public:
  using Error::Error;
};

/// A matrix that must be symmetric positive definite is not.
class NotPositiveDefinite : public Error {
 public:
  using Error::Error;
};

/// A file could not be opened, parsed, or written.
class IoError : public Error {
 public:
  using Error::Error;
};

/// A numerical procedure exhausted its attempt budget without producing a
/// usable solution. The message carries the attempt log.
class SolverFailure : public Error {
 public:
  using Error::Error;
};

/// A row of a loading matrix could not be assigned to exactly one block.
/// Carries the offending 1-based row indices; callers decide the fallback.
class AmbiguousPartition : public Error {
 public:
  AmbiguousPartition(const std::string& what, std::vector<int> rows)
      : Error(what), rows_(std::move(rows)) {}
  const std::vector<int>& rows() const { return rows_; }

 private:
  std::vector<int> rows_;
};

}  // namespace hfa
