#include "tslab/errors.hpp"

namespace tslab {

std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::DimensionMismatch: return "DimensionMismatch";
    case ErrorKind::NonFinite: return "NonFinite";
    case ErrorKind::SingularMatrix: return "SingularMatrix";
    case ErrorKind::InvalidSpec: return "InvalidSpec";
    case ErrorKind::NonFiniteLoss: return "NonFiniteLoss";
    case ErrorKind::WidthCondition: return "WidthCondition";
    case ErrorKind::DepthMismatch: return "DepthMismatch";
    case ErrorKind::BoxOverflow: return "BoxOverflow";
    case ErrorKind::RankDeficient: return "RankDeficient";
    case ErrorKind::TooFewPoints: return "TooFewPoints";
    case ErrorKind::InvalidConfig: return "InvalidConfig";
    case ErrorKind::NoSuccessfulTrials: return "NoSuccessfulTrials";
    case ErrorKind::IoError: return "IoError";
    case ErrorKind::ParseError: return "ParseError";
  }
  return "Unknown";
}

}  // namespace tslab
