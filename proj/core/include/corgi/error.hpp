#pragma once

#include <stdexcept>
#include <string>

namespace corgi {

// Base class for all library errors.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Malformed text input (e.g. a bad LIBSVM line); message carries the line number.
struct ParseError : Error {
  using Error::Error;
};

// Structurally bad binary dataset file: wrong magic, unsupported version,
// truncated header/footer, inconsistent index.
struct FormatError : Error {
  using Error::Error;
};

// Data that is structurally fine but fails a checksum or coverage invariant.
struct IntegrityError : Error {
  using Error::Error;
};

// A configuration or argument that violates a documented precondition.
struct InvalidArgument : Error {
  using Error::Error;
};

// Training produced a non-finite loss; the epoch was aborted.
struct DivergenceError : Error {
  using Error::Error;
};

}  // namespace corgi
