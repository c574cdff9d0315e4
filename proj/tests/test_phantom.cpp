#include <gtest/gtest.h>

#include <cmath>
#include <map>

#include "oracles.hpp"
#include "otbridge/bridge.hpp"
#include "otbridge/error.hpp"
#include "otbridge/geometry.hpp"
#include "otbridge/guidance.hpp"
#include "otbridge/phantom.hpp"

using namespace otbridge;

namespace {

VesselPhantomSpec straight_tube(double radius, double noise = 0.0) {
  VesselPhantomSpec s;
  s.control = {{64, -10}, {64, 64}, {64, 138}};
  s.radius = {radius};
  s.noise = noise;
  return s;
}

StenosisSpec stenosis(Location loc, double ds, double extent = 0.15) {
  StenosisSpec s;
  s.location = loc;
  s.severity = ds;
  s.extent = extent;
  return s;
}

}  // namespace

TEST(Centerline, UniformArclength) {
  const Centerline c = build_centerline({{10, 10}, {40, 60}, {90, 70}, {100, 120}}, 0.25);
  ASSERT_GT(c.points.size(), 100u);
  const double step = c.length / static_cast<double>(c.points.size() - 1);
  for (std::size_t i = 1; i < c.points.size(); ++i) {
    const double d = std::hypot(c.points[i].row - c.points[i - 1].row, c.points[i].col - c.points[i - 1].col);
    ASSERT_NEAR(d, step, 0.01 * step);
  }
  EXPECT_NEAR(c.points.front().row, 10, 1e-9);
  EXPECT_NEAR(c.points.back().col, 120, 1e-9);
}

TEST(Render, StraightTubeIsExactSausage) {
  const Phantom ph = render_phantom(straight_tube(6.0));
  for (int r = 0; r < 128; ++r)
    for (int c = 0; c < 128; ++c) {
      // Distance to the segment from (64, -10) to (64, 138); every pixel projects inside it.
      const double d = std::abs(r - 64.0);
      ASSERT_EQ(static_cast<bool>(ph.mask(r, c)), d <= 6.0) << r << "," << c;
    }
}

TEST(Render, NoiselessImageHasTwoPlateaus) {
  const VesselPhantomSpec spec = straight_tube(5.5);
  const Phantom ph = render_phantom(spec);
  for (int r = 0; r < 128; ++r)
    for (int c = 0; c < 128; ++c) {
      const double g = std::abs(r - 64.0) - 5.5;
      if (g <= -1.0) ASSERT_EQ(ph.image(r, c), spec.vessel);
      if (g >= 1.0) ASSERT_EQ(ph.image(r, c), spec.background);
    }
}

TEST(Render, Deterministic) {
  const VesselPhantomSpec spec = random_phantom_spec(5, PhantomStyle::Curved);
  const Phantom a = render_phantom(spec), b = render_phantom(spec);
  EXPECT_EQ(a.image, b.image);
  EXPECT_EQ(a.mask, b.mask);
  VesselPhantomSpec other = spec;
  other.seed += 1;
  EXPECT_NE(render_phantom(other).image, a.image);
}

TEST(Render, SelfIntersectionRejected) {
  VesselPhantomSpec s;
  s.control = {{20, 20}, {100, 60}, {20, 100}, {60, 20}, {100, 100}};
  s.radius = {6};
  try {
    render_phantom(s);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::SelfIntersection);
  }
}

TEST(Render, SpecValidation) {
  VesselPhantomSpec s = straight_tube(5);
  s.vessel = 0.9;
  EXPECT_THROW(render_phantom(s), Error);
  s = straight_tube(5);
  s.control.pop_back();
  EXPECT_THROW(render_phantom(s), Error);
  s = straight_tube(-1);
  EXPECT_THROW(render_phantom(s), Error);
}

TEST(Render, ThresholdRecoversMask) {
  for (std::uint64_t seed = 0; seed < 12; ++seed) {
    VesselPhantomSpec spec = random_phantom_spec(seed, static_cast<PhantomStyle>(seed % 4));
    spec.noise = 0.05;
    const Phantom ph = render_phantom(spec);
    EXPECT_GE(oracle::dice(hard_structure(ph.image, 0.5), ph.mask), 0.95) << "seed " << seed;
  }
}

TEST(Stenosis, ZeroSeverityIsIdentity) {
  const VesselPhantomSpec spec = random_phantom_spec(7, PhantomStyle::Gentle);
  EXPECT_EQ(apply_stenosis_to_mask(spec, stenosis(Location::Mid, 0.0)), render_phantom(spec).mask);
}

TEST(Stenosis, OcclusionCutsTheVessel) {
  const VesselPhantomSpec spec = straight_tube(5.0);
  const BinaryMask m = apply_stenosis_to_mask(spec, stenosis(Location::Mid, 1.0));
  const TubeField f = tube_field(spec);
  const double s0 = location_fraction(Location::Mid);
  const Point2 c = f.centerline.at(s0);
  const int col = static_cast<int>(std::lround(c.col));
  for (int r = 0; r < 128; ++r) EXPECT_FALSE(m(r, col)) << r;
  EXPECT_EQ(cross_section_halfwidth(m, f.centerline, s0, 20), 0.0);
}

TEST(Stenosis, HalfSeverityHalvesWidth) {
  const VesselPhantomSpec spec = straight_tube(6.0);
  const Phantom ph = render_phantom(spec);
  const BinaryMask m = apply_stenosis_to_mask(spec, stenosis(Location::Mid, 0.5));
  const double s0 = location_fraction(Location::Mid);
  const double local = 2 * cross_section_halfwidth(ph.mask, ph.centerline, s0, 20);
  const double narrowed = 2 * cross_section_halfwidth(m, ph.centerline, s0, 20);
  EXPECT_NEAR(narrowed, 0.5 * local, 1.0);
}

TEST(Stenosis, WindowValidation) {
  EXPECT_THROW(stenosis(Location::Terminal, 0.5, 0.2).validate(), Error);
  EXPECT_NO_THROW(stenosis(Location::Terminal, 0.5, 0.08).validate());
  EXPECT_THROW(stenosis(Location::Mid, 0.5, 0.6).validate(), Error);
  StenosisSpec s = stenosis(Location::Mid, 0.5);
  s.asymmetry = 0.5;
  const auto [lo, hi] = s.window();
  EXPECT_NEAR(hi - lo, s.extent, 1e-15);
  EXPECT_EQ(s.weight(location_fraction(Location::Mid)), 1.0);
  EXPECT_EQ(s.weight(lo), 0.0);
}

TEST(Severity, UneditedStraightTube) {
  for (double r : {4.0, 5.0, 5.5, 6.0}) {
    const Phantom ph = render_phantom(straight_tube(r));
    EXPECT_LT(std::abs(measure_severity(ph.mask, ph.centerline, stenosis(Location::Mid, 0.5))), 0.05) << r;
  }
}

TEST(Severity, UneditedAndOccludedTubes) {
  for (std::uint64_t seed = 0; seed < 8; ++seed) {
    const VesselPhantomSpec spec = random_phantom_spec(seed, static_cast<PhantomStyle>(seed % 3));
    const Phantom ph = render_phantom(spec);
    const StenosisSpec sten = stenosis(Location::Mid, 1.0);
    // Edges of a tilted binary tube are only known to half a pixel, and the
    // window minimum picks the low side of that staircase.
    EXPECT_LT(std::abs(measure_severity(ph.mask, ph.centerline, sten)), 0.08);
    EXPECT_EQ(measure_severity(apply_stenosis_to_mask(spec, sten), ph.centerline, sten), 1.0);
  }
}

TEST(Severity, RoundTrip) {
  for (double ds : {0.3, 0.5, 0.7}) {
    for (std::uint64_t seed = 0; seed < 30; ++seed) {
      const VesselPhantomSpec spec = random_phantom_spec(1000 + seed, static_cast<PhantomStyle>(seed % 3));
      const StenosisSpec sten = stenosis(static_cast<Location>(seed % 3), ds, 0.1 + 0.005 * seed);
      const Centerline c = build_centerline(spec.control);
      EXPECT_NEAR(measure_severity(apply_stenosis_to_mask(spec, sten), c, sten), ds, 0.08)
          << "ds " << ds << " seed " << seed;
    }
  }
}

TEST(Severity, NoVesselRaises) {
  const Centerline c = build_centerline(straight_tube(5).control);
  try {
    measure_severity(BinaryMask(128, 128), c, stenosis(Location::Mid, 0.5));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::NoCrossSection);
  }
}

TEST(EditCase, InvariantsHoldOnRandomCases) {
  for (int i = 0; i < 20; ++i) {
    const EditCase ec = sample_edit_case(42, i);
    EXPECT_EQ(ec.S_star, intersect(ec.edited_mask, ec.M));
    for (std::size_t p = 0; p < ec.M.size(); ++p)
      if (!ec.M[p]) ASSERT_EQ(ec.mask[p], ec.edited_mask[p]);
    // The margin covers the changed pixels by 3 px.
    const BinaryMask changed = symmetric_difference(ec.mask, ec.edited_mask);
    EXPECT_EQ(intersect(dilate(changed.size() && count(changed) ? changed : ec.M, 3.0), ec.M),
              dilate(count(changed) ? changed : ec.M, 3.0));
    const auto& bb = ec.annotation.bbox;
    EXPECT_GE(bb[0], 0);
    EXPECT_GE(bb[1], 0);
    EXPECT_LE(bb[0] + bb[2], 128);
    EXPECT_LE(bb[1] + bb[3], 128);
    EXPECT_GE(ec.annotation.polygon.size(), 6u);
  }
}

TEST(EditCase, ZeroSeverityKeepsTargetEqualToVessel) {
  const VesselPhantomSpec spec = random_phantom_spec(9, PhantomStyle::Gentle);
  const EditCase ec = make_edit_case(spec, stenosis(Location::Mid, 0.0));
  EXPECT_EQ(ec.edited_mask, ec.mask);
  EXPECT_EQ(ec.S_star, intersect(ec.mask, ec.M));
  // M is the dilated window section only.
  const TubeField f = tube_field(spec);
  const auto [lo, hi] = ec.stenosis.window();
  BinaryMask section(128, 128);
  for (std::size_t p = 0; p < section.size(); ++p)
    section[p] = ec.mask[p] && f.nearest_s[p] >= lo && f.nearest_s[p] <= hi;
  EXPECT_EQ(ec.M, dilate(section, 3.0));
}

TEST(EditCase, Deterministic) {
  const EditCase a = sample_edit_case(3, 5), b = sample_edit_case(3, 5);
  EXPECT_EQ(a.image, b.image);
  EXPECT_EQ(a.M, b.M);
  EXPECT_EQ(a.annotation.polygon, b.annotation.polygon);
}

TEST(Sampler, SeverityMarginal) {
  const auto specs = sample_edit_distribution(5000, 11);
  ASSERT_EQ(specs.size(), 5000u);
  double bins[4] = {0, 0, 0, 0};
  std::map<Location, double> locs;
  for (const StenosisSpec& s : specs) {
    EXPECT_NO_THROW(s.validate());
    const int bin = s.severity >= 1.0 ? 3 : s.severity >= 0.7 ? 2 : s.severity >= 0.5 ? 1 : 0;
    bins[bin] += 1.0 / 5000;
    locs[s.location] += 1.0 / 5000;
  }
  const double expected[] = {0.34, 0.37, 0.26, 0.03};
  for (int b = 0; b < 4; ++b) EXPECT_NEAR(bins[b], expected[b], 0.02);
  EXPECT_NEAR(locs[Location::Proximal], 0.34, 0.02);
  EXPECT_NEAR(locs[Location::Mid], 0.44, 0.02);
  EXPECT_NEAR(locs[Location::Distal], 0.22, 0.02);
}

TEST(Sampler, DeterministicAndSingle) {
  const auto a = sample_edit_distribution(50, 1), b = sample_edit_distribution(50, 1);
  for (int i = 0; i < 50; ++i) {
    EXPECT_EQ(a[i].severity, b[i].severity);
    EXPECT_EQ(a[i].location, b[i].location);
  }
  EXPECT_EQ(sample_edit_distribution(1, 2).size(), 1u);
  EXPECT_THROW(sample_edit_distribution(0, 2), Error);
}

TEST(AnchorOnPhantom, NoChangeRequest) {
  const VesselPhantomSpec spec = random_phantom_spec(21, PhantomStyle::Gentle);
  const EditCase ec = make_edit_case(spec, stenosis(Location::Mid, 0.0));
  const BinaryMask S = intersect(hard_structure(ec.image, 0.5), ec.M);
  const TargetAnchor a = build_target_anchor(ec.image, ec.M, S);
  double diff = 0;
  for (std::size_t p = 0; p < ec.M.size(); ++p)
    if (ec.M[p]) diff += std::abs(a.image[p] - ec.image[p]);
  EXPECT_LT(diff / count(ec.M), 0.05);
}

TEST(AnchorOnPhantom, HalfStenosisGeometry) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const VesselPhantomSpec spec = random_phantom_spec(30 + seed, static_cast<PhantomStyle>(seed % 4));
    const EditCase ec = make_edit_case(spec, stenosis(static_cast<Location>(seed % 3), 0.5));
    const TargetAnchor a = build_target_anchor(ec.image, ec.M, ec.S_star);
    EXPECT_GE(oracle::dice(intersect(hard_structure(a.image, 0.5), ec.M), ec.S_star), 0.97);
    for (std::size_t p = 0; p < ec.M.size(); ++p)
      if (!ec.M[p]) ASSERT_EQ(a.image[p], ec.image[p]);
  }
}
