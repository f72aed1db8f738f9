#pragma once

#include <stdexcept>
#include <string>

namespace pvnowcast {

/// Input data violates a documented invariant (bad CSV rows, gaps, wrong dims).
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A numerical precondition failed (constant series, empty input, ...).
class DomainError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Monte Carlo synthesis could not satisfy its constraints within the retry budget.
class SynthesisError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Serialized model does not match the supported schema or version.
class ModelFormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace pvnowcast
