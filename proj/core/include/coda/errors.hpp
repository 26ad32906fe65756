#pragma once

#include <stdexcept>
#include <string>

namespace coda {

// Base of every error raised by the library. Subclasses name the broken contract.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Dimension mismatch between an operand and what the callee expects.
class ShapeError : public Error {
 public:
  using Error::Error;
};

// A scalar parameter outside its admissible range.
class ParameterError : public Error {
 public:
  using Error::Error;
};

// The problem cannot provide what was asked (closed-form expectation, bounded domain, ...).
class CapabilityError : public Error {
 public:
  using Error::Error;
};

// Algorithm/problem composition-mode mismatch, or an operation undefined in a mode.
class ModeError : public Error {
 public:
  using Error::Error;
};

class OrderingError : public Error {
 public:
  using Error::Error;
};

// A NaN or Inf tried to leave an operation.
class NumericError : public Error {
 public:
  using Error::Error;
};

class DegeneracyError : public Error {
 public:
  using Error::Error;
};

class DataError : public Error {
 public:
  using Error::Error;
};

class ConstructionError : public Error {
 public:
  using Error::Error;
};

}  // namespace coda
