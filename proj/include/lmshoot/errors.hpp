#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace lmshoot {

// File/stream level failures (missing file, unwritable destination).
class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed input data; carries a 1-based line number when known.
class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string& msg, std::size_t line = 0)
      : std::runtime_error(line ? msg + " at line " + std::to_string(line) : msg),
        line_(line)
  {
  }
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

// Mismatched landmark counts/dimensions between paired inputs.
class ShapeError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// The precompute backend refuses to materialize a term matrix larger
// than its memory budget.
class MemoryBudgetError : public std::runtime_error {
 public:
  MemoryBudgetError(std::size_t required, std::size_t available)
      : std::runtime_error("term matrix needs " + std::to_string(required) +
                           " bytes but the memory budget is " +
                           std::to_string(available) + " bytes"),
        required_(required),
        available_(available)
  {
  }
  std::size_t required_bytes() const { return required_; }
  std::size_t available_bytes() const { return available_; }

 private:
  std::size_t required_;
  std::size_t available_;
};

// Non-finite state during time integration or optimization.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Integration produced NaN/Inf; records where.
class DivergedError : public NumericalError {
 public:
  DivergedError(int timestep, std::ptrdiff_t point = -1)
      : NumericalError("non-finite state at timestep " + std::to_string(timestep) +
                       (point >= 0 ? " (point " + std::to_string(point) + ")" : "")),
        timestep_(timestep),
        point_(point)
  {
  }
  int timestep() const { return timestep_; }
  std::ptrdiff_t point() const { return point_; }

 private:
  int timestep_;
  std::ptrdiff_t point_;
};

}  // namespace lmshoot
