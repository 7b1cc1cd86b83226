#pragma once

#include <stdexcept>
#include <string>

namespace mfgplan {

/// Raised when an operation's precondition on its inputs is violated.
class InvalidArgument : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Raised when a numerical procedure cannot produce a valid result
/// (zero pivot, step-size underflow, lost mass, failed bracket, ...).
class NumericalFailure : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

namespace detail {
inline void require(bool ok, const std::string& what) {
  if (!ok) throw InvalidArgument(what);
}
}  // namespace detail

}  // namespace mfgplan
