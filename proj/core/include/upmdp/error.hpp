#pragma once

#include <cstddef>
#include <exception>
#include <stdexcept>
#include <string>

namespace upmdp {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed input: bad documents, bad arguments, violated preconditions.
class ValidationError : public Error {
 public:
  using Error::Error;
};

class ParseError : public ValidationError {
 public:
  ParseError(const std::string& message, std::size_t position);
  std::size_t position() const { return position_; }

 private:
  std::size_t position_;
};

// No admissible solution exists, e.g. no K satisfies the risk equation.
class InfeasibleError : public Error {
 public:
  using Error::Error;
};

// Numerical failure: non-convergence, infeasible interval rows, bad sums.
class NumericError : public Error {
 public:
  using Error::Error;
};

enum ExitCode : int {
  kExitOk = 0,
  kExitFailure = 1,
  kExitValidation = 2,
  kExitInfeasible = 3,
  kExitNumeric = 4,
};

int exit_code_for(const std::exception& e);

}  // namespace upmdp
