#pragma once

#include <stdexcept>
#include <string>

namespace crossq {

/// Shapes or architectures that do not line up.
class StructuralError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

/// An operation was called out of order (e.g. backward without a cached forward).
class UsageError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

/// Non-finite values where finite ones are required.
class NumericalFault : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Bad configuration value or unknown name.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Required data (runs, evaluation cells) is absent.
class MissingData : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace crossq
