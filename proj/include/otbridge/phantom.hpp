#pragma once

#include <array>
#include <cstdint>
#include <string_view>
#include <vector>

#include "otbridge/image.hpp"

namespace otbridge {

struct Point2 {
  double row = 0.0;
  double col = 0.0;
};

/// Arclength-parametrised polyline through a Catmull-Rom spline.
struct Centerline {
  std::vector<Point2> points;  // uniformly spaced in arclength
  std::vector<double> s;       // arclength fraction of each point, 0..1
  double length = 0.0;

  Point2 at(double frac) const;
  /// Unit tangent (d row, d col) at arclength fraction `frac`.
  Point2 tangent(double frac) const;
};

Centerline build_centerline(const std::vector<Point2>& control, double spacing = 0.25);

struct VesselPhantomSpec {
  int height = 128;
  int width = 128;
  std::vector<Point2> control;
  /// Radius knots spread evenly over s in [0, 1], linearly interpolated.
  std::vector<double> radius = {5.0};
  double background = 0.85;
  double vessel = 0.25;
  double noise = 0.02;
  std::uint64_t seed = 0;

  void validate() const;
  double radius_at(double s) const;
  double max_radius() const;
};

enum class Location { Proximal, Mid, Distal, Terminal };
Location parse_location(std::string_view name);
std::string_view to_string(Location loc);
double location_fraction(Location loc);

struct StenosisSpec {
  Location location = Location::Mid;
  double severity = 0.5;   // %DS as a fraction
  double extent = 0.15;    // arclength fraction covered by the narrowing
  double asymmetry = 0.0;  // shifts the bump inside the window, in (-1, 1)

  /// Narrowing window [lo, hi] in arclength fraction.
  std::array<double, 2> window() const;
  /// Smooth bump, 1 at the location and 0 outside the window.
  double weight(double s) const;
  void validate() const;
};

/// Per-pixel distance to the centerline and arclength fraction of the nearest point.
struct TubeField {
  Centerline centerline;
  DistanceField distance;
  DistanceField nearest_s;
};

TubeField tube_field(const VesselPhantomSpec& spec);

struct Phantom {
  GrayImage image;
  BinaryMask mask;
  Centerline centerline;
};

/// Throws SelfIntersection when distant parts of the centerline come closer
/// than twice the largest radius.
Phantom render_phantom(const VesselPhantomSpec& spec);

/// Mask of the tube with radius r(s) (1 - DS w(s)). Radii below half a pixel leave a gap.
BinaryMask apply_stenosis_to_mask(const VesselPhantomSpec& spec, const StenosisSpec& sten);
BinaryMask apply_stenosis_to_mask(const VesselPhantomSpec& spec, const TubeField& field, const StenosisSpec& sten);

/// Half-width of the mask along the centerline normal at fraction `s`
/// (bilinear sampling, crossing at 0.5).
double cross_section_halfwidth(const BinaryMask& mask, const Centerline& centerline, double s, double reach);

/// 1 - min half-width inside the window / median half-width outside it.
double measure_severity(const BinaryMask& mask, const Centerline& centerline, const StenosisSpec& sten,
                        double reach = 20.0);

struct CocoRecord {
  std::array<double, 4> bbox{};   // x, y, w, h
  std::vector<double> polygon;    // x0, y0, x1, y1, ...
  double area = 0.0;
};

struct EditCase {
  VesselPhantomSpec phantom;
  StenosisSpec stenosis;
  GrayImage image;
  BinaryMask mask;         // m
  BinaryMask edited_mask;  // m~
  BinaryMask M;
  BinaryMask S_star;
  Centerline centerline;
  CocoRecord annotation;
};

EditCase make_edit_case(const VesselPhantomSpec& spec, const StenosisSpec& sten, double margin = 3.0);

/// Independent draws from the edit distribution: severity bins 25-49/50-69/
/// 70-99/100 %DS with weights .34/.37/.26/.03 and proximal/mid/distal
/// locations with weights .34/.44/.22.
std::vector<StenosisSpec> sample_edit_distribution(int n, std::uint64_t seed);

/// Style presets standing in for the branch dimension of the edit table.
enum class PhantomStyle { Straight, Gentle, Curved, Tapered };
std::string_view to_string(PhantomStyle style);

/// Random single-tube phantom crossing the frame left to right.
VesselPhantomSpec random_phantom_spec(std::uint64_t seed, PhantomStyle style, int size = 128);

/// The n-th case of a seeded phantom batch: style, geometry and edit all
/// derive from (seed, index).
EditCase sample_edit_case(std::uint64_t seed, int index, int size = 128);

}  // namespace otbridge
