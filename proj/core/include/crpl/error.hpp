// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace crpl {

enum class ErrorCode {
  InvalidArgument,
  ZeroVector,
  DimensionMismatch,
  EmptyInput,
  EmptySequence,
  UnknownOwner,
  MissingCentroid,
  InfeasibleMarginals,
  NonIntegralCardinalities,
  TooLarge,
  IoFailure,
  SchemaMismatch,
  TruncatedBlob,
  SeedFitFailure,
};

std::string_view to_string(ErrorCode code);

/// Every failure raised by the library carries one of the codes above so
/// callers (and tests) can branch on the kind without parsing messages.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what);

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] void fail(ErrorCode code, const std::string& what);

inline void require(bool condition, ErrorCode code, const char* what) {
  if (!condition) fail(code, what);
}

}  // namespace crpl
