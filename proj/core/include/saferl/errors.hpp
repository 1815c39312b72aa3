#ifndef SAFERL_ERRORS_HPP_
#define SAFERL_ERRORS_HPP_

#include <stdexcept>
#include <string>

namespace saferl {

// Base for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Argument outside the mathematical domain of an operation.
class DomainError : public Error {
 public:
  using Error::Error;
};

class DimensionMismatch : public Error {
 public:
  using Error::Error;
};

// The admissible control set C(x) is empty at the current state.
class SafeSetEmpty : public Error {
 public:
  using Error::Error;
};

// Rejection sampling exhausted its attempt budget; pi(C(x)|x) is too small.
class SafeSetSamplingFailed : public Error {
 public:
  using Error::Error;
};

// Estimated truncation mass fell below the usable threshold.
class NormalizationUnderflow : public Error {
 public:
  using Error::Error;
};

class PreconditionViolated : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class NonFiniteLoss : public Error {
 public:
  using Error::Error;
};

}  // namespace saferl

#endif  // SAFERL_ERRORS_HPP_
