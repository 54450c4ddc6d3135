#pragma once

#include <stdexcept>
#include <string>

namespace qhl {

// Base of every error the library throws. The harness maps the concrete type
// onto a process exit code (see harness.hpp).
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Argument outside the mathematical domain of an operation.
class DomainError : public Error {
 public:
  using Error::Error;
};

// Inconsistent or invalid configuration; `invariant` names the violated rule.
class ConfigError : public Error {
 public:
  ConfigError(std::string invariant, const std::string& what)
      : Error(what), invariant_(std::move(invariant)) {}
  const std::string& invariant() const noexcept { return invariant_; }

 private:
  std::string invariant_;
};

// A norm or integral that does not converge.
class DivergenceError : public Error {
 public:
  DivergenceError(std::string norm, const std::string& what)
      : Error(what), norm_(std::move(norm)) {}
  const std::string& norm() const noexcept { return norm_; }

 private:
  std::string norm_;
};

// The requested accuracy could not be reached; carries the achieved bound.
class AccuracyLossError : public Error {
 public:
  AccuracyLossError(double achieved, const std::string& what)
      : Error(what), achieved_(achieved) {}
  double achieved_bound() const noexcept { return achieved_; }

 private:
  double achieved_;
};

// Event count cap hit during simulation.
class ExplosionError : public Error {
 public:
  using Error::Error;
};

// Too little data for a statistic to be defined.
class InsufficientDataError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace qhl
