#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace mfg {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Bad input: violated precondition or malformed configuration.
class ValidationError : public Error {
 public:
  using Error::Error;
};

class DimensionError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

class UnsupportedError : public Error {
 public:
  using Error::Error;
};

/// An iterative solve stopped before reaching its tolerance.
class ConvergenceError : public Error {
 public:
  ConvergenceError(const std::string& what, double last_residual, int iterations)
      : Error(what), last_residual_(last_residual), iterations_(iterations) {}
  double last_residual() const { return last_residual_; }
  int iterations() const { return iterations_; }

 private:
  double last_residual_;
  int iterations_;
};

/// Non-finite state during a particle simulation.
class SimulationError : public Error {
 public:
  SimulationError(const std::string& what, double time, std::size_t particle)
      : Error(what), time_(time), particle_(particle) {}
  double time() const { return time_; }
  std::size_t particle() const { return particle_; }

 private:
  double time_;
  std::size_t particle_;
};

class BlowUpError : public Error {
 public:
  BlowUpError(const std::string& what, double time) : Error(what), time_(time) {}
  double time() const { return time_; }

 private:
  double time_;
};

}  // namespace mfg
