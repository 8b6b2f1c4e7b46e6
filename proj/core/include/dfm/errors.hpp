#pragma once

#include <stdexcept>
#include <string>

namespace dfm {

/// Malformed user input: bad parameter range, schema violation, broken file.
class InputError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Query outside an operation's time domain (e.g. score within eta_min of t=1).
class TimeDomainError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Score requested at a state carrying zero interpolant mass.
class UndefinedScoreError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Instance exceeds the dense-exact capacity (state count above kMaxExactStates).
class CapacityError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A non-finite value appeared where a finite one is required.
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace dfm
