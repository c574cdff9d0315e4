#include "otbridge/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <random>

#include "otbridge/distance.hpp"
#include "otbridge/rng.hpp"

namespace otbridge {

BoundarySet extract_boundary(const BinaryMask& mask) {
  BoundarySet out;
  const auto background = [&](int r, int c) { return !mask.contains(r, c) || mask(r, c) == 0; };
  for (int r = 0; r < mask.height(); ++r) {
    for (int c = 0; c < mask.width(); ++c) {
      if (!mask(r, c)) continue;
      if (background(r - 1, c) || background(r + 1, c) || background(r, c - 1) || background(r, c + 1)) {
        out.pixels.push_back({r, c});
      }
    }
  }
  return out;
}

GrayImage sobel_edge_map(const GrayImage& image) {
  const int w = image.width();
  const int h = image.height();
  GrayImage out(w, h);
  if (image.empty()) return out;
  const auto at = [&](int r, int c) { return image(std::clamp(r, 0, h - 1), std::clamp(c, 0, w - 1)); };
  double peak = 0.0;
  for (int r = 0; r < h; ++r) {
    for (int c = 0; c < w; ++c) {
      const double gx = (at(r - 1, c + 1) + 2.0 * at(r, c + 1) + at(r + 1, c + 1)) -
                        (at(r - 1, c - 1) + 2.0 * at(r, c - 1) + at(r + 1, c - 1));
      const double gy = (at(r + 1, c - 1) + 2.0 * at(r + 1, c) + at(r + 1, c + 1)) -
                        (at(r - 1, c - 1) + 2.0 * at(r - 1, c) + at(r - 1, c + 1));
      const double mag = std::hypot(gx, gy);
      out(r, c) = mag;
      peak = std::max(peak, mag);
    }
  }
  if (peak <= 0.0) return GrayImage(w, h, 0.0);
  for (double& v : out.values()) v /= peak;
  return out;
}

BinaryMask morphology(const BinaryMask& mask, MorphOp op, double radius) {
  if (!(radius >= 1.0)) throw Error(ErrorKind::InvalidArgument, "morphology radius must be >= 1");
  // Dilation by a disk is a threshold on the exact distance to the foreground;
  // erosion is the dual on the complement.
  const BinaryMask& source = op == MorphOp::Dilate ? mask : complement(mask);
  BinaryMask grown(mask.width(), mask.height(), 0);
  if (count(source) > 0) {
    const DistanceField dist = euclidean_distance_transform(source);
    const double r2 = radius * radius;
    for (std::size_t i = 0; i < grown.size(); ++i) grown[i] = dist[i] * dist[i] <= r2 + 1e-9 ? 1 : 0;
  }
  return op == MorphOp::Dilate ? grown : complement(grown);
}

BinaryMask translate(const BinaryMask& mask, int drow, int dcol) {
  BinaryMask out(mask.width(), mask.height(), 0);
  for (int r = 0; r < mask.height(); ++r) {
    for (int c = 0; c < mask.width(); ++c) {
      if (mask(r, c) && out.contains(r + drow, c + dcol)) out(r + drow, c + dcol) = 1;
    }
  }
  return out;
}

PerturbKind parse_perturb_kind(std::string_view name) {
  if (name == "jitter") return PerturbKind::Jitter;
  if (name == "erode_dilate") return PerturbKind::ErodeDilate;
  if (name == "displace") return PerturbKind::Displace;
  throw Error(ErrorKind::InvalidArgument, "unknown perturbation '" + std::string(name) + "'");
}

std::string_view to_string(PerturbKind kind) {
  switch (kind) {
    case PerturbKind::Jitter: return "jitter";
    case PerturbKind::ErodeDilate: return "erode_dilate";
    case PerturbKind::Displace: return "displace";
  }
  return "unknown";
}

Displacement random_displacement(double magnitude, std::uint64_t seed) {
  std::mt19937_64 rng(mix_seed(seed, 0x6469'7370ULL));
  std::uniform_real_distribution<double> angle(0.0, 2.0 * std::numbers::pi);
  const double theta = angle(rng);
  return {static_cast<int>(std::lround(magnitude * std::sin(theta))),
          static_cast<int>(std::lround(magnitude * std::cos(theta)))};
}

namespace {

BinaryMask jitter(const BinaryMask& mask, double magnitude, std::uint64_t seed) {
  const int w = mask.width();
  const int h = mask.height();
  const BoundarySet boundary = extract_boundary(mask);
  if (boundary.empty()) return mask;

  std::mt19937_64 rng(mix_seed(seed, 0x6a69'7474ULL));
  std::uniform_real_distribution<double> offset(-magnitude, magnitude);
  BinaryMask boundary_raster(w, h, 0);
  GrayImage offsets(w, h, 0.0);
  for (const Pixel& p : boundary.pixels) {
    boundary_raster(p.row, p.col) = 1;
    offsets(p.row, p.col) = offset(rng);
  }

  // Level function whose zero crossing sits half a pixel outside the boundary
  // pixels: inside -(d_bg - 0.5), outside d_fg - 0.5.
  const DistanceField d_fg = euclidean_distance_transform(mask);
  const BinaryMask bg = complement(mask);
  const bool has_bg = count(bg) > 0;
  const DistanceField d_bg = has_bg ? euclidean_distance_transform(bg) : DistanceField(w, h, 0.0);
  const FeatureTransform owner = feature_transform(boundary_raster);

  BinaryMask out(w, h, 0);
  for (std::size_t i = 0; i < out.size(); ++i) {
    double level;
    if (mask[i]) {
      level = has_bg ? -(d_bg[i] - 0.5) : -std::numeric_limits<double>::infinity();
    } else {
      level = d_fg[i] - 0.5;
    }
    const Pixel& o = owner.nearest[i];
    out[i] = level < offsets(o.row, o.col) ? 1 : 0;
  }
  return out;
}

}  // namespace

BinaryMask perturb_mask(const BinaryMask& mask, PerturbKind kind, double magnitude, std::uint64_t seed) {
  if (!(magnitude >= 1.0)) throw Error(ErrorKind::InvalidArgument, "perturbation magnitude must be >= 1");
  BinaryMask out;
  switch (kind) {
    case PerturbKind::Jitter:
      out = jitter(mask, magnitude, seed);
      break;
    case PerturbKind::ErodeDilate: {
      std::mt19937_64 rng(mix_seed(seed, 0x6572'6f64ULL));
      const bool grow = std::bernoulli_distribution(0.5)(rng);
      out = morphology(mask, grow ? MorphOp::Dilate : MorphOp::Erode, magnitude);
      break;
    }
    case PerturbKind::Displace: {
      const Displacement d = random_displacement(magnitude, seed);
      out = translate(mask, d.drow, d.dcol);
      break;
    }
  }
  if (count(out) == 0) throw Error(ErrorKind::PerturbationEmptied, "perturbed mask has no foreground");
  return out;
}

CompositeCondition build_composite_condition(const GrayImage& image, const BinaryMask& vessel_mask) {
  require_same_shape(image, vessel_mask, "build_composite_condition");
  CompositeCondition cond;
  cond.mask = vessel_mask;
  cond.masked_edge = apply_mask(sobel_edge_map(image), vessel_mask);
  cond.boundary = rasterize(extract_boundary(vessel_mask), vessel_mask.width(), vessel_mask.height());
  return cond;
}

}  // namespace otbridge
