#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace otbridge {

enum class ErrorKind {
  EmptyMask,
  DegenerateMask,
  ShapeMismatch,
  PerturbationEmptied,
  NoConvergence,
  TooLarge,
  StepOutOfRange,
  InsufficientStatistics,
  EmptyBoundary,
  EmptySet,
  SelfIntersection,
  NoCrossSection,
  ImageTooSmall,
  InvalidArgument,
  Io,
  DiskWrite,
};

std::string_view to_string(ErrorKind kind);

/// Every library failure is reported as an Error carrying a machine-readable kind.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(std::string(to_string(kind)) + ": " + message), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

}  // namespace otbridge
