#pragma once

#include <stdexcept>
#include <string>

namespace uct {

/// Array shapes, grids or geometries that do not line up.
class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Invalid or inconsistent configuration (bad geometry, filter, step sizes...).
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Input data violating a documented precondition (e.g. negative counts).
class ValidationError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// A computation produced non-finite values.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Training failure: non-finite gradient or divergent loss.
class TrainingError : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

/// API misuse, such as back-propagating without saved activations.
class UsageError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace uct
