#pragma once

#include <cstdint>
#include <string_view>

#include "otbridge/image.hpp"

namespace otbridge {

/// Foreground pixels with at least one background 4-neighbour. Pixels outside
/// the frame count as background, so masks touching the border keep a boundary.
BoundarySet extract_boundary(const BinaryMask& mask);

/// Sobel gradient magnitude normalised by its global maximum (replicated border).
GrayImage sobel_edge_map(const GrayImage& image);

enum class MorphOp { Erode, Dilate };

/// Binary morphology with the disk {dr^2 + dc^2 <= r^2}. Out-of-frame pixels
/// are ignored, which makes erosion and dilation exact duals.
BinaryMask morphology(const BinaryMask& mask, MorphOp op, double radius);
inline BinaryMask erode(const BinaryMask& mask, double radius) { return morphology(mask, MorphOp::Erode, radius); }
inline BinaryMask dilate(const BinaryMask& mask, double radius) { return morphology(mask, MorphOp::Dilate, radius); }

/// Rigid integer translation; pixels shifted out of the frame are dropped.
BinaryMask translate(const BinaryMask& mask, int drow, int dcol);

enum class PerturbKind { Jitter, ErodeDilate, Displace };

PerturbKind parse_perturb_kind(std::string_view name);
std::string_view to_string(PerturbKind kind);

struct Displacement {
  int drow = 0;
  int dcol = 0;
};

/// Direction drawn uniformly from the circle, length `magnitude`, rounded to the grid.
Displacement random_displacement(double magnitude, std::uint64_t seed);

/// Seeded supervision-mask corruption:
///  - Jitter: each boundary pixel gets an offset in [-magnitude, magnitude]
///    along the contour normal and the interior is re-filled;
///  - ErodeDilate: erosion or dilation by `magnitude`, chosen at random;
///  - Displace: rigid translation by random_displacement(magnitude, seed).
/// Throws PerturbationEmptied when nothing is left.
BinaryMask perturb_mask(const BinaryMask& mask, PerturbKind kind, double magnitude, std::uint64_t seed);

/// Stacked editing condition (m, e*m, boundary(m)).
struct CompositeCondition {
  BinaryMask mask;
  GrayImage masked_edge;
  BinaryMask boundary;
};

CompositeCondition build_composite_condition(const GrayImage& image, const BinaryMask& vessel_mask);

}  // namespace otbridge
