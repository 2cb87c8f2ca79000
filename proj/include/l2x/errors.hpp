#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace l2x {

// Shape disagreement between operands, or an invalid axis.
class DimensionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Input outside an operation's mathematical domain (log of a non-positive value).
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

// Bad hyperparameter or configuration value (temperature <= 0, k > d, ...).
class ParameterError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Caller violated an API precondition (non-scalar backward root, wrong noise rows, ...).
class ContractError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

// Dataset content problem: empty input, misaligned records, out-of-range indices.
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ParseError : public DataError {
 public:
  ParseError(const std::string& what, std::size_t position)
      : DataError(what), position_(position) {}
  // Byte offset for binary payloads, 1-based line number for text files.
  std::size_t position() const noexcept { return position_; }

 private:
  std::size_t position_;
};

// Model file written by an incompatible format version or architecture.
class VersionError : public DataError {
 public:
  using DataError::DataError;
};

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Non-finite objective or loss during training.
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Enumeration would exceed the configured combinatorial budget.
class ResourceError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace l2x
