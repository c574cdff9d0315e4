#include "otbridge/error.hpp"

namespace otbridge {

std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::EmptyMask: return "EmptyMask";
    case ErrorKind::DegenerateMask: return "DegenerateMask";
    case ErrorKind::ShapeMismatch: return "ShapeMismatch";
    case ErrorKind::PerturbationEmptied: return "PerturbationEmptied";
    case ErrorKind::NoConvergence: return "NoConvergence";
    case ErrorKind::TooLarge: return "TooLarge";
    case ErrorKind::StepOutOfRange: return "StepOutOfRange";
    case ErrorKind::InsufficientStatistics: return "InsufficientStatistics";
    case ErrorKind::EmptyBoundary: return "EmptyBoundary";
    case ErrorKind::EmptySet: return "EmptySet";
    case ErrorKind::SelfIntersection: return "SelfIntersection";
    case ErrorKind::NoCrossSection: return "NoCrossSection";
    case ErrorKind::ImageTooSmall: return "ImageTooSmall";
    case ErrorKind::InvalidArgument: return "InvalidArgument";
    case ErrorKind::Io: return "Io";
    case ErrorKind::DiskWrite: return "DiskWrite";
  }
  return "Unknown";
}

}  // namespace otbridge
