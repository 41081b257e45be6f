#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace bexrl {

// Every failure the library reports maps to one of these kinds. The numeric
// value doubles as the CLI exit code, so keep them distinct and stable.
enum class ErrorKind : int {
  kUsage = 2,
  kParse = 10,
  kSpecMismatch = 11,
  kEmptyDataset = 12,
  kIo = 13,
  kInvalidConfig = 14,
  kShape = 20,
  kNonScalarLoss = 21,
  kDimMismatch = 22,
  kDivergence = 23,
  kInvalidLambda = 30,
  kEmptyTokens = 31,
  kConvergence = 32,
  kTooFewNodes = 33,
  kDegenerateEmbedding = 34,
  kUnknownToken = 35,
  kInvalidWindow = 36,
  kEmptySegments = 40,
  kInvalidDistribution = 41,
  kSingleCluster = 50,
  kCoincidentCentroids = 51,
  kLengthMismatch = 52,
  kStaleArtifact = 60,
};

std::string_view error_kind_name(ErrorKind kind);

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(message), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }
  int exit_code() const noexcept { return static_cast<int>(kind_); }

 private:
  ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& message) {
  throw Error(kind, message);
}

}  // namespace bexrl
