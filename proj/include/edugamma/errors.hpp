#pragma once

#include <stdexcept>
#include <string>

namespace edugamma {

/// Argument outside the mathematical domain of an operation.
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// Density evaluated at x = 0 where it diverges (a*p < 1).
class SingularDensity : public DomainError {
 public:
  using DomainError::DomainError;
};

/// An iterative kernel hit its iteration cap.
class ConvergenceError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// An attainment record violates its invariants.
class InvalidRecord : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Every grid restart produced a non-finite objective.
class FitFailed : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed input file (bad header, unreadable numbers, ...).
class ParseError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace edugamma
