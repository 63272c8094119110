#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace tslab {

enum class ErrorKind {
  DimensionMismatch,
  NonFinite,
  SingularMatrix,
  InvalidSpec,
  NonFiniteLoss,
  WidthCondition,
  DepthMismatch,
  BoxOverflow,
  RankDeficient,
  TooFewPoints,
  InvalidConfig,
  NoSuccessfulTrials,
  IoError,
  ParseError,
};

std::string_view to_string(ErrorKind kind);

/// Base exception for every failure raised by the library. The kind lets
/// callers (and tests) branch on the failure class without parsing messages.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(std::string(to_string(kind)) + ": " + message), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& message) {
  throw Error(kind, message);
}

}  // namespace tslab
