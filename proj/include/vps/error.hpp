#ifndef VPS_ERROR_HPP
#define VPS_ERROR_HPP

#include <stdexcept>
#include <string>
#include <vector>

namespace vps {

/// Base class of every exception thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Argument outside the mathematical domain of an operation.
class DomainError : public Error {
 public:
  using Error::Error;
};

/// A configuration with coincident or crossed positions (infinite internal energy).
class InfeasibleError : public Error {
 public:
  using Error::Error;
};

/// Cholesky pivot <= 0.
class NotPositiveDefiniteError : public Error {
 public:
  using Error::Error;
};

/// Iterative solver ran out of iterations. Carries the best iterate found.
class ConvergenceError : public Error {
 public:
  ConvergenceError(const std::string& what, std::vector<double> best = {})
      : Error(what), best_(std::move(best)) {}

  const std::vector<double>& best_iterate() const noexcept { return best_; }

 private:
  std::vector<double> best_;
};

/// Invalid experiment configuration (maps to CLI exit code 2).
class ConfigError : public Error {
 public:
  using Error::Error;
};

}  // namespace vps

#endif  // VPS_ERROR_HPP
