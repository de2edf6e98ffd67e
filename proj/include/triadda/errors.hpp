#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace triadda {

// Violated precondition or malformed input (dimension mismatch, bad parameters).
class ContractError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// A particle or statistical state became non-finite during time integration.
class DivergenceError : public std::runtime_error {
 public:
  DivergenceError(const std::string& what, double time, std::int64_t particle)
      : std::runtime_error(what), time_(time), particle_(particle) {}
  double time() const { return time_; }
  std::int64_t particle() const { return particle_; }

 private:
  double time_;
  std::int64_t particle_;
};

// A filter update produced non-finite or runaway samples.
class FilterDivergenceError : public DivergenceError {
 public:
  FilterDivergenceError(const std::string& what, double time, std::int64_t step,
                        std::int64_t particle)
      : DivergenceError(what, time, particle), step_(step) {}
  std::int64_t step() const { return step_; }

 private:
  std::int64_t step_;
};

class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Time grids of two series cannot be brought onto a common grid.
class AlignmentError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class CalibrationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace triadda
