#pragma once

#include <stdexcept>
#include <string>

namespace chlosv {

/// Non-finite or out-of-domain argument (data corruption, not a zero likelihood).
class InvalidInput : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Malformed configuration value or unknown key.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed or inconsistent bar data.
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Every particle received zero likelihood in some period.
class FilterDegeneracy : public std::runtime_error {
 public:
  FilterDegeneracy(int period, const std::string& what)
      : std::runtime_error("filter degeneracy at period " + std::to_string(period) + ": " + what),
        period_(period) {}

  int period() const noexcept { return period_; }

 private:
  int period_;
};

}  // namespace chlosv
