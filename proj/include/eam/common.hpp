#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace eam {

inline constexpr double kLogFloor = -690.0;
inline constexpr double kDensityFloor = 1e-300;

enum class Boundary { Lower, Upper };

// Invalid parameter values (violated model invariants, bad arguments).
class DomainError : public std::domain_error {
public:
  using std::domain_error::domain_error;
};

// Malformed configuration, design, or input files.
class ConfigError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

// Non-finite objective, failed factorization, or similar numerical breakdown.
class NumericError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

// A likelihood term is exactly zero where a log-gradient was requested.
class ZeroDensityError : public NumericError {
public:
  explicit ZeroDensityError(std::size_t trial)
      : NumericError("zero density at trial " + std::to_string(trial)), trial_(trial) {}
  std::size_t trial() const noexcept { return trial_; }

private:
  std::size_t trial_;
};

}  // namespace eam
