#pragma once

#include <vector>

#include "otbridge/image.hpp"

namespace otbridge {

/// Distance to the nearest foreground pixel together with that pixel.
struct FeatureTransform {
  DistanceField distance;
  std::vector<Pixel> nearest;  // row-major, one entry per pixel
};

/// Exact Euclidean feature transform (separable lower-envelope algorithm).
/// Throws EmptyMask when the mask has no foreground.
FeatureTransform feature_transform(const BinaryMask& mask);

/// Exact Euclidean distance to the nearest foreground pixel; 0 on foreground.
DistanceField euclidean_distance_transform(const BinaryMask& mask);

/// Signed distance to the boundary set of `mask`: negative strictly inside,
/// positive outside, zero on boundary pixels. Throws DegenerateMask if the
/// mask is all-foreground or all-background.
DistanceField signed_distance_transform(const BinaryMask& mask);

}  // namespace otbridge
