// SPDX-License-Identifier: Apache-2.0
#include "crpl/error.hpp"

namespace crpl {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::ZeroVector: return "ZeroVector";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::EmptyInput: return "EmptyInput";
    case ErrorCode::EmptySequence: return "EmptySequence";
    case ErrorCode::UnknownOwner: return "UnknownOwner";
    case ErrorCode::MissingCentroid: return "MissingCentroid";
    case ErrorCode::InfeasibleMarginals: return "InfeasibleMarginals";
    case ErrorCode::NonIntegralCardinalities: return "NonIntegralCardinalities";
    case ErrorCode::TooLarge: return "TooLarge";
    case ErrorCode::IoFailure: return "IoFailure";
    case ErrorCode::SchemaMismatch: return "SchemaMismatch";
    case ErrorCode::TruncatedBlob: return "TruncatedBlob";
    case ErrorCode::SeedFitFailure: return "SeedFitFailure";
  }
  return "Unknown";
}

Error::Error(ErrorCode code, const std::string& what)
    : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

void fail(ErrorCode code, const std::string& what) { throw Error(code, what); }

}  // namespace crpl
