#include "mito/error.hpp"

namespace mito {

std::string_view to_string(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::InsufficientTissue: return "InsufficientTissue";
    case ErrorKind::StainDegenerate: return "StainDegenerate";
    case ErrorKind::DegenerateHistogram: return "DegenerateHistogram";
    case ErrorKind::RegionTooSmall: return "RegionTooSmall";
    case ErrorKind::PatchTooSmall: return "PatchTooSmall";
    case ErrorKind::TooFewCases: return "TooFewCases";
    case ErrorKind::InvalidConfig: return "InvalidConfig";
    case ErrorKind::ShapeMismatch: return "ShapeMismatch";
    case ErrorKind::BatchTooSmall: return "BatchTooSmall";
    case ErrorKind::NonFinitePart: return "NonFinitePart";
    case ErrorKind::NonFiniteLoss: return "NonFiniteLoss";
    case ErrorKind::SingleClass: return "SingleClass";
    case ErrorKind::MissingCheckpoint: return "MissingCheckpoint";
    case ErrorKind::InvalidArgument: return "InvalidArgument";
    case ErrorKind::Io: return "Io";
  }
  return "Unknown";
}

}  // namespace mito
