#pragma once

#include <stdexcept>
#include <string>

namespace sdewms {

/// Malformed generator, model, or other structural invariant violation.
class ValidationError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// A caller passed an out-of-domain argument (negative horizon, empty interval, ...).
class ArgumentError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// A time was requested from a NoisePath that does not store it.
class LookupError : public std::out_of_range {
 public:
  using std::out_of_range::out_of_range;
};

/// The model lacks something a scheme needs (Jacobian, commutativity, scalar shape).
class UnsupportedModel : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

class FitError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Bad experiment or CLI configuration; maps to exit code 2.
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

}  // namespace sdewms
