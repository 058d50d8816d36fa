#pragma once

#include <stdexcept>
#include <string>

namespace digitfrac {

enum class ErrorCode {
  EmptyDigits,
  DigitOutOfRange,
  DuplicateDigit,
  DimensionMismatch,
  WeightsNotNormalized,
  MixedBases,
  BoxOutOfRange,
  OutOfUnitCube,
  TolTooTight,
  BudgetExceeded,
  BadSlabParams,
  BadFamilyParams,
  PsiTooLarge,
  InvalidArgument,
  ParseError,
  ValidationError,
};

const char* to_string(ErrorCode code);

// Budget errors are the ones where the request was well-formed but exceeded
// a configured work limit.
bool is_budget_error(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace digitfrac
