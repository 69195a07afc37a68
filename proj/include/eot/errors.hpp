#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace eot {

// Base class for all library errors; subclasses let callers (and the CLI's
// exit-code taxonomy) tell bad inputs apart from structural failures.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Invalid construction arguments or malformed input data.
struct ValidationError : Error {
  using Error::Error;
};

// Shape or alignment mismatch between supports, matrices, or vectors.
struct ShapeMismatch : ValidationError {
  using ValidationError::ValidationError;
};

// An exact algorithm refused an instance beyond its documented size cap.
struct CapacityError : Error {
  using Error::Error;
};

// A computation touched a zero entry where strict positivity is required
// (the discrete stand-in for absolute continuity).
struct SupportViolation : Error {
  using Error::Error;
};

// Factorization verification failed; carries the worst offending cell.
struct NotInvariant : Error {
  NotInvariant(const std::string& what, std::size_t row_, std::size_t col_, double gap_)
      : Error(what), row(row_), col(col_), gap(gap_) {}
  std::size_t row;
  std::size_t col;
  double gap;
};

}  // namespace eot
