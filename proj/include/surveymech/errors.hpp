#pragma once

#include <stdexcept>
#include <string>

namespace surveymech {

/// Bad arguments to a solver or estimator (empty sets, negative budgets, ...).
class InvalidInput : public std::invalid_argument {
 public:
  explicit InvalidInput(const std::string& what) : std::invalid_argument(what) {}
};

/// A query outside the domain a mechanism is defined on, e.g. a cost above the cap.
class OutOfRange : public std::out_of_range {
 public:
  explicit OutOfRange(const std::string& what) : std::out_of_range(what) {}
};

/// Malformed configuration or generator descriptor.
class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

/// A solver could not produce a result (infeasible subproblem, search blowup).
class SolverError : public std::runtime_error {
 public:
  explicit SolverError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace surveymech
