#pragma once

#include <stdexcept>
#include <string>

namespace csopt {

// Bad dimensions, invalid run or experiment settings.
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// An evaluator returned a non-finite value. The message echoes the input.
class EvaluationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A diagnostic needs an oracle or support enumeration the problem lacks.
class CapabilityError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A derived constant was requested outside the region where it is defined
// (lambda at or below its floor, gamma not above gamma_min, ...).
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

}  // namespace csopt
