#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "oracles.hpp"
#include "otbridge/error.hpp"
#include "otbridge/geometry.hpp"
#include "otbridge/guidance.hpp"

using namespace otbridge;

namespace {

constexpr int N = 64;

BinaryMask band_mask(int top, int bottom) {
  BinaryMask m(N, N);
  for (int r = top; r <= bottom; ++r)
    for (int c = 0; c < N; ++c) m(r, c) = 1;
  return m;
}

BinaryMask square(int r0, int c0, int side) {
  BinaryMask m(N, N);
  for (int r = r0; r < r0 + side; ++r)
    for (int c = c0; c < c0 + side; ++c)
      if (m.contains(r, c)) m(r, c) = 1;
  return m;
}

GrayImage render(const BinaryMask& lumen, double noise, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n(0.0, noise);
  GrayImage g(N, N);
  for (std::size_t i = 0; i < g.size(); ++i)
    g[i] = std::clamp((lumen[i] ? 0.25 : 0.85) + (noise > 0 ? n(rng) : 0.0), 0.0, 1.0);
  return g;
}

// Horizontal vessel of half-width 5 whose middle section is narrowed to half-width w.
struct Scene {
  GrayImage x0;
  BinaryMask M;
  BinaryMask S;
};

Scene narrowing_scene(int w, std::uint64_t seed) {
  const BinaryMask vessel = band_mask(27, 37);
  BinaryMask narrowed = vessel;
  for (int r = 0; r < N; ++r)
    for (int c = 24; c < 40; ++c) narrowed(r, c) = std::abs(r - 32) <= w;
  const BinaryMask M = dilate(symmetric_difference(vessel, narrowed), 3);
  return {render(vessel, 0.02, seed), M, intersect(narrowed, M)};
}

// Midstate between x0 and the anchor with noise, kept inside (0, 1).
GrayImage midstate(const Scene& s, double t, double noise, std::uint64_t seed) {
  const TargetAnchor a = build_target_anchor(s.x0, s.M, s.S);
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n(0.0, noise);
  GrayImage y(N, N);
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = std::clamp((1 - t) * s.x0[i] + t * a.image[i] + n(rng), 0.02, 0.98);
  return y;
}

}  // namespace

TEST(Extractor, Constants) {
  EXPECT_EQ(count(hard_structure(GrayImage(8, 8, 0.0), 0.5)), 64u);
  EXPECT_EQ(count(hard_structure(GrayImage(8, 8, 1.0), 0.5)), 0u);
  const GrayImage s = soft_structure(GrayImage(2, 2, 0.5), 0.5, 0.05);
  EXPECT_DOUBLE_EQ(s[0], 0.5);
  EXPECT_THROW(hard_structure(GrayImage(2, 2, 0.0), 1.0), Error);
}

TEST(GeoDiscrepancy, ZeroWhenLumenMatchesTarget) {
  const Scene s = narrowing_scene(2, 1);
  const FeasibilitySpec spec(s.x0, s.M, s.S);
  const GrayImage target = render(s.S, 0.0, 0);
  GrayImage y = s.x0;
  for (std::size_t i = 0; i < y.size(); ++i)
    if (s.M[i]) y[i] = target[i];
  EXPECT_EQ(geo_discrepancy_sdt(y, spec), 0.0);
}

TEST(GeoDiscrepancy, ShiftedBandMatchesBruteForce) {
  BinaryMask M(N, N);
  for (int r = 10; r < 54; ++r)
    for (int c = 10; c < 54; ++c) M(r, c) = 1;
  const BinaryMask S = intersect(band_mask(28, 36), M);
  const FeasibilitySpec spec(GrayImage(N, N, 0.85), M, S);
  const auto target_boundary = oracle::boundary(S);
  double prev = 0.0;
  for (int shift : {1, 2, 3}) {
    const GrayImage y = render(band_mask(28 + shift, 36 + shift), 0.0, 0);
    double brute = 0.0;
    const auto b = oracle::boundary(intersect(hard_structure(y, 0.5), M));
    for (const Pixel& p : b) brute += oracle::nearest_distance(p, target_boundary);
    brute /= static_cast<double>(b.size());
    const double got = geo_discrepancy_sdt(y, spec);
    EXPECT_NEAR(got, brute, 1e-12);
    // Along the straight edges each boundary pixel is exactly `shift` away; the
    // cut ends at the border of M lie on the target boundary itself.
    for (const Pixel& p : b)
      if (p.col > 10 + shift && p.col < 53 - shift) ASSERT_EQ(spec.target_distance()(p.row, p.col), shift) << p.row << "," << p.col;
    EXPECT_GT(got, prev);
    prev = got;
  }
}

TEST(GeoDiscrepancy, EmptyBoundaryRaised) {
  const Scene s = narrowing_scene(2, 2);
  const FeasibilitySpec spec(s.x0, s.M, s.S);
  try {
    geo_discrepancy_sdt(GrayImage(N, N, 0.9), spec);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::EmptyBoundary);
  }
}

TEST(Chamfer, HandCases) {
  const BoundarySet a{{{3, 4}, {10, 10}, {0, 0}}};
  EXPECT_EQ(chamfer_distance(a, a), 0.0);
  EXPECT_DOUBLE_EQ(chamfer_distance(BoundarySet{{{0, 0}}}, BoundarySet{{{3, 4}}}), 5.0);
  EXPECT_THROW(chamfer_distance(a, BoundarySet{}), Error);
}

TEST(Chamfer, MatchesDoubleLoop) {
  std::mt19937_64 rng(3);
  std::uniform_int_distribution<int> coord(0, 40), len(1, 30);
  for (int trial = 0; trial < 100; ++trial) {
    BoundarySet a, b;
    for (int i = len(rng); i > 0; --i) a.pixels.push_back({coord(rng), coord(rng)});
    for (int i = len(rng); i > 0; --i) b.pixels.push_back({coord(rng), coord(rng)});
    double ab = 0, ba = 0;
    for (const Pixel& p : a.pixels) ab += oracle::nearest_distance(p, b.pixels);
    for (const Pixel& p : b.pixels) ba += oracle::nearest_distance(p, a.pixels);
    const double expected = 0.5 * (ab / a.pixels.size() + ba / b.pixels.size());
    EXPECT_NEAR(chamfer_distance(a, b), expected, 1e-9);
  }
}

TEST(BoundaryIoU, HandCases) {
  const BinaryMask a = square(10, 10, 12);
  EXPECT_EQ(boundary_iou(a, a, 2), 1.0);
  EXPECT_EQ(boundary_dice(a, a, 2), 1.0);
  EXPECT_EQ(boundary_iou(a, square(40, 40, 12), 2), 0.0);
  EXPECT_THROW(boundary_iou(a, BinaryMask(N, N), 2), Error);
  EXPECT_THROW(boundary_iou(a, a, 0.5), Error);
}

TEST(BoundaryIoU, ShiftedSquaresMatchDefinition) {
  std::mt19937_64 rng(4);
  for (int trial = 0; trial < 100; ++trial) {
    const BinaryMask a = trial < 2 ? square(10, 10, 12) : oracle::random_mask(N, N, 0.4, rng);
    const BinaryMask b = trial < 2 ? square(10, 11, 12) : oracle::random_mask(N, N, 0.4, rng);
    const double band = trial < 2 ? 2.0 : 1.0 + trial % 3;
    const auto bands = [&](const BinaryMask& m) {
      BinaryMask edge(N, N);
      for (const Pixel& p : oracle::boundary(m)) edge(p.row, p.col) = 1;
      return oracle::disk_filter(edge, band, true);
    };
    const BinaryMask da = bands(a), db = bands(b);
    double inter = 0, uni = 0, sa = 0, sb = 0;
    for (std::size_t i = 0; i < da.size(); ++i) {
      inter += da[i] && db[i];
      uni += da[i] || db[i];
      sa += da[i];
      sb += db[i];
    }
    EXPECT_NEAR(boundary_iou(a, b, band), inter / uni, 1e-9);
    EXPECT_NEAR(boundary_dice(a, b, band), 2 * inter / (sa + sb), 1e-9);
  }
}

TEST(Projection, GradientMatchesFiniteDifferences) {
  std::mt19937_64 rng(5);
  for (GeoTerm term : {GeoTerm::Sdt, GeoTerm::RegionOverlap}) {
    ProjectionConfig cfg;
    cfg.geo_term = term;
    for (int state = 0; state < 10; ++state) {
      const Scene s = narrowing_scene(1 + state % 4, 100 + state);
      const FeasibilitySpec spec(s.x0, s.M, s.S);
      // Wide soft width so that most pixels carry a non-negligible gradient.
      cfg.beta = 0.05 + 0.05 * (state % 3);
      GrayImage y = midstate(s, 0.4, 0.1, 200 + state);
      const GrayImage g = projection_gradient(y, spec, cfg);
      std::uniform_int_distribution<std::size_t> pick(0, y.size() - 1);
      std::vector<std::size_t> probes;
      while (probes.size() < 10) {
        const std::size_t i = pick(rng);
        // Half the probes inside M where the geometric term lives.
        if (probes.size() % 2 == 0 && !s.M[i]) continue;
        probes.push_back(i);
      }
      for (std::size_t i : probes) {
        const double keep = y[i];
        const auto central = [&](double h) {
          y[i] = keep + h;
          const double up = projection_objective(y, spec, cfg).total;
          y[i] = keep - h;
          const double down = projection_objective(y, spec, cfg).total;
          y[i] = keep;
          return (up - down) / (2 * h);
        };
        // Richardson extrapolation; a large h keeps round-off of the O(100) objective small.
        const double fd = (4 * central(1e-4) - central(2e-4)) / 3;
        EXPECT_LE(std::abs(fd - g[i]), 1e-4 * std::max(std::abs(fd), std::abs(g[i])) + 1e-9)
            << "state " << state << " pixel " << i << " fd " << fd << " analytic " << g[i];
      }
    }
  }
}

TEST(Projection, FeasibleInputIsFixedPoint) {
  const Scene s = narrowing_scene(2, 6);
  const FeasibilitySpec spec(s.x0, s.M, s.S);
  const TargetAnchor a = build_target_anchor(s.x0, s.M, s.S);
  const GrayImage y = project_feasible(a.image, spec, {});
  for (std::size_t i = 0; i < y.size(); ++i) ASSERT_NEAR(y[i], a.image[i], 1e-6);
  for (std::size_t i = 0; i < y.size(); ++i)
    if (!s.M[i]) ASSERT_EQ(y[i], s.x0[i]);
}

TEST(Projection, ProtectedRegionRestoredAndObjectiveDescends) {
  const ProjectionConfig cfg;
  int improved = 0;
  for (int trial = 0; trial < 50; ++trial) {
    const Scene s = narrowing_scene(1 + trial % 4, 300 + trial);
    const FeasibilitySpec spec(s.x0, s.M, s.S);
    const GrayImage x = midstate(s, 0.3 + 0.01 * trial, 0.05, 400 + trial);
    const GrayImage y = project_feasible(x, spec, cfg);
    for (std::size_t i = 0; i < y.size(); ++i)
      if (!s.M[i]) ASSERT_EQ(y[i], s.x0[i]);
    GrayImage restored = x;
    for (std::size_t i = 0; i < x.size(); ++i)
      if (!s.M[i]) restored[i] = s.x0[i];
    EXPECT_LE(projection_objective(y, spec, cfg).total, projection_objective(restored, spec, cfg).total + 1e-8);
    const double before = geo_discrepancy_sdt(x, spec), after = geo_discrepancy_sdt(y, spec);
    EXPECT_LE(after, before + 1e-12) << "trial " << trial;
    improved += after < before;
  }
  EXPECT_GT(improved, 25);
}

TEST(Projection, PenaltyOnlyModeLeavesResidualOutside) {
  const Scene s = narrowing_scene(2, 7);
  const FeasibilitySpec spec(s.x0, s.M, s.S);
  ProjectionConfig cfg;
  cfg.hard_preserve = false;
  GrayImage x = midstate(s, 0.5, 0.05, 8);
  const GrayImage y = project_feasible(x, spec, cfg);
  double residual = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i)
    if (!s.M[i]) residual = std::max(residual, std::abs(y[i] - s.x0[i]));
  EXPECT_GT(residual, 0.0);
  EXPECT_LE(projection_objective(y, spec, cfg).total, projection_objective(x, spec, cfg).total);
}

TEST(Gpg, StepLogsDiscrepancyOfOutput) {
  const Scene s = narrowing_scene(2, 9);
  const FeasibilitySpec spec(s.x0, s.M, s.S);
  GuidanceTrace trace;
  const BridgeState out = gpg_step({12, midstate(s, 0.5, 0.05, 10)}, spec, {}, trace);
  ASSERT_EQ(trace.records.size(), 1u);
  EXPECT_EQ(trace.records[0].k, 12);
  EXPECT_TRUE(trace.records[0].guided);
  EXPECT_EQ(trace.records[0].E, geo_discrepancy_sdt(out.image, spec));
  EXPECT_EQ(trace.records[0].protected_residual, 0.0);
}

TEST(GuidedRollout, UnguidedNoiselessReachesAnchor) {
  const Scene s = narrowing_scene(2, 11);
  const FeasibilitySpec spec(s.x0, s.M, s.S);
  const TargetAnchor a = build_target_anchor(s.x0, s.M, s.S);
  const GuidedResult r = run_guided_rollout(spec, a, {50, 0.0}, {}, GuidanceMode::None, 5, 1);
  EXPECT_EQ(r.x1, a.image);
  EXPECT_EQ(r.trace.records.size(), 51u);
  EXPECT_EQ(r.trajectory.size(), 51u);
}

TEST(GuidedRollout, KBeyondHorizonEqualsEndpointOnly) {
  const Scene s = narrowing_scene(3, 12);
  const FeasibilitySpec spec(s.x0, s.M, s.S);
  const TargetAnchor a = build_target_anchor(s.x0, s.M, s.S);
  const GuidedResult p = run_guided_rollout(spec, a, {20, 0.05}, {}, GuidanceMode::EveryK, 21, 3);
  const GuidedResult q = run_guided_rollout(spec, a, {20, 0.05}, {}, GuidanceMode::EndpointOnly, 5, 3);
  ASSERT_EQ(p.trajectory.size(), q.trajectory.size());
  for (std::size_t k = 0; k < p.trajectory.size(); ++k) EXPECT_EQ(p.trajectory[k].image, q.trajectory[k].image);
  EXPECT_EQ(p.x1, q.x1);
}

TEST(GuidedRollout, OutputsAreHardFeasibleOutside) {
  const Scene s = narrowing_scene(1, 13);
  const FeasibilitySpec spec(s.x0, s.M, s.S);
  const TargetAnchor a = build_target_anchor(s.x0, s.M, s.S);
  for (GuidanceMode mode : {GuidanceMode::EveryK, GuidanceMode::EndpointOnly}) {
    const GuidedResult r = run_guided_rollout(spec, a, {50, 0.05}, {}, mode, 5, 4);
    for (std::size_t i = 0; i < r.x1.size(); ++i)
      if (!s.M[i]) ASSERT_EQ(r.x1[i], s.x0[i]);
    EXPECT_EQ(r.trace.records.size(), 51u);
    EXPECT_EQ(r.trace.records.back().E, geo_discrepancy_sdt(r.x1, spec));
  }
}

TEST(GuidedRollout, NoiselessTraceNonIncreasingAtGuidanceSteps) {
  for (int w = 1; w <= 4; ++w) {
    const Scene s = narrowing_scene(w, 14 + w);
    const FeasibilitySpec spec(s.x0, s.M, s.S);
    const TargetAnchor a = build_target_anchor(s.x0, s.M, s.S);
    const GuidedResult r = run_guided_rollout(spec, a, {50, 0.0}, {}, GuidanceMode::EveryK, 5, 0);
    double prev = std::numeric_limits<double>::infinity();
    for (const TraceRecord& rec : r.trace.records) {
      if (!rec.guided) continue;
      EXPECT_LE(rec.E, prev + 1e-12) << "w=" << w << " k=" << rec.k;
      prev = rec.E;
    }
  }
}

TEST(GuidanceMode, Names) {
  EXPECT_EQ(parse_guidance_mode("every_K"), GuidanceMode::EveryK);
  EXPECT_EQ(parse_guidance_mode("endpoint_only"), GuidanceMode::EndpointOnly);
  EXPECT_EQ(to_string(GuidanceMode::None), "none");
  EXPECT_THROW(parse_guidance_mode("often"), Error);
}
