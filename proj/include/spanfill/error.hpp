#pragma once

#include <stdexcept>
#include <string>

namespace spanfill {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed input file (bad JSON, missing fields). Message carries file and record locus.
class ParseError : public Error {
 public:
  using Error::Error;
};

/// Input parsed but violates a data invariant (span bounds, duplicate slot labels).
class ValidationError : public Error {
 public:
  using Error::Error;
};

/// Tensor or sequence shapes disagree with each other or with a config.
class ShapeError : public Error {
 public:
  using Error::Error;
};

/// Precomputed embedding lookup failed.
class LookupError : public Error {
 public:
  using Error::Error;
};

class TrainingError : public Error {
 public:
  using Error::Error;
};

}  // namespace spanfill
