#pragma once

#include <numbers>
#include <stdexcept>
#include <string>
#include <vector>

namespace isingspec {

inline constexpr double kPi = std::numbers::pi;
inline constexpr double kEulerGamma = std::numbers::egamma;

// Argument outside the mathematical domain of an operation.
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

// Structural precondition of an operation not met by its input.
class PreconditionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Evaluation point where the requested quantity is infinite.
class DivergenceError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A statistical estimate with its one-sigma error bar.
struct Estimate {
  double value = 0.0;
  double error = 0.0;
};

// Quality flags attached to scientific results. A non-empty list means the
// result is usable but should not be trusted blindly.
using Flags = std::vector<std::string>;

}  // namespace isingspec
