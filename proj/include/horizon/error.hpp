#pragma once

#include <stdexcept>
#include <string>

namespace horizon {

// Input outside the mathematical domain of an operation (x outside [0,1],
// log of a nonpositive payoff, malformed distribution).
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

// Bad descriptor, flag or configuration. Carries the offending token.
class UsageError : public std::invalid_argument {
 public:
  UsageError(const std::string& what, std::string token = {})
      : std::invalid_argument(what), token_(std::move(token)) {}
  const std::string& token() const noexcept { return token_; }

 private:
  std::string token_;
};

// Non-finite loss, failed bracketing and similar numerical breakdowns.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace horizon
