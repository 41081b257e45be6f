#include "bexrl/util/error.hpp"

namespace bexrl {

std::string_view error_kind_name(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kUsage: return "UsageError";
    case ErrorKind::kParse: return "ParseError";
    case ErrorKind::kSpecMismatch: return "SpecMismatch";
    case ErrorKind::kEmptyDataset: return "EmptyDataset";
    case ErrorKind::kIo: return "IoError";
    case ErrorKind::kInvalidConfig: return "InvalidConfig";
    case ErrorKind::kShape: return "ShapeError";
    case ErrorKind::kNonScalarLoss: return "NonScalarLoss";
    case ErrorKind::kDimMismatch: return "DimMismatch";
    case ErrorKind::kDivergence: return "DivergenceError";
    case ErrorKind::kInvalidLambda: return "InvalidLambda";
    case ErrorKind::kEmptyTokens: return "EmptyTokens";
    case ErrorKind::kConvergence: return "ConvergenceError";
    case ErrorKind::kTooFewNodes: return "TooFewNodes";
    case ErrorKind::kDegenerateEmbedding: return "DegenerateEmbedding";
    case ErrorKind::kUnknownToken: return "UnknownToken";
    case ErrorKind::kInvalidWindow: return "InvalidWindow";
    case ErrorKind::kEmptySegments: return "EmptySegments";
    case ErrorKind::kInvalidDistribution: return "InvalidDistribution";
    case ErrorKind::kSingleCluster: return "SingleCluster";
    case ErrorKind::kCoincidentCentroids: return "CoincidentCentroids";
    case ErrorKind::kLengthMismatch: return "LengthMismatch";
    case ErrorKind::kStaleArtifact: return "StaleArtifact";
  }
  return "Error";
}

}  // namespace bexrl
