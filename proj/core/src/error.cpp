#include "upmdp/error.hpp"

namespace upmdp {

ParseError::ParseError(const std::string& message, std::size_t position)
    : ValidationError(message + " (at offset " + std::to_string(position) + ")"),
      position_(position) {}

int exit_code_for(const std::exception& e) {
  if (dynamic_cast<const ValidationError*>(&e)) return kExitValidation;
  if (dynamic_cast<const InfeasibleError*>(&e)) return kExitInfeasible;
  if (dynamic_cast<const NumericError*>(&e)) return kExitNumeric;
  return kExitFailure;
}

}  // namespace upmdp
