#include "digitfrac/error.hpp"

namespace digitfrac {

const char* to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::EmptyDigits: return "EmptyDigits";
    case ErrorCode::DigitOutOfRange: return "DigitOutOfRange";
    case ErrorCode::DuplicateDigit: return "DuplicateDigit";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::WeightsNotNormalized: return "WeightsNotNormalized";
    case ErrorCode::MixedBases: return "MixedBases";
    case ErrorCode::BoxOutOfRange: return "BoxOutOfRange";
    case ErrorCode::OutOfUnitCube: return "OutOfUnitCube";
    case ErrorCode::TolTooTight: return "TolTooTight";
    case ErrorCode::BudgetExceeded: return "BudgetExceeded";
    case ErrorCode::BadSlabParams: return "BadSlabParams";
    case ErrorCode::BadFamilyParams: return "BadFamilyParams";
    case ErrorCode::PsiTooLarge: return "PsiTooLarge";
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::ParseError: return "ParseError";
    case ErrorCode::ValidationError: return "ValidationError";
  }
  return "UnknownError";
}

bool is_budget_error(ErrorCode code) {
  return code == ErrorCode::BudgetExceeded || code == ErrorCode::TolTooTight;
}

}  // namespace digitfrac
