#include "otbridge/phantom.hpp"

#include <algorithm>
#include <functional>
#include <limits>
#include <cmath>
#include <numbers>
#include <random>

#include "otbridge/error.hpp"
#include "otbridge/geometry.hpp"
#include "otbridge/rng.hpp"

namespace otbridge {

namespace {

Point2 lerp(Point2 a, Point2 b, double t) { return {a.row + t * (b.row - a.row), a.col + t * (b.col - a.col)}; }
double dist(Point2 a, Point2 b) { return std::hypot(a.row - b.row, a.col - b.col); }

Point2 catmull_rom(Point2 p0, Point2 p1, Point2 p2, Point2 p3, double t) {
  const double t2 = t * t, t3 = t2 * t;
  const auto blend = [&](double a, double b, double c, double d) {
    return 0.5 * (2 * b + (-a + c) * t + (2 * a - 5 * b + 4 * c - d) * t2 + (-a + 3 * b - 3 * c + d) * t3);
  };
  return {blend(p0.row, p1.row, p2.row, p3.row), blend(p0.col, p1.col, p2.col, p3.col)};
}

double smoothstep(double x) {
  x = std::clamp(x, 0.0, 1.0);
  return x * x * (3 - 2 * x);
}

// Index of the polyline segment containing arclength fraction `frac`, and the local parameter.
std::pair<std::size_t, double> locate(const Centerline& c, double frac) {
  if (c.points.size() < 2) throw Error(ErrorKind::InvalidArgument, "centerline needs two points");
  frac = std::clamp(frac, 0.0, 1.0);
  const auto it = std::upper_bound(c.s.begin(), c.s.end(), frac);
  std::size_t i = it == c.s.begin() ? 0 : static_cast<std::size_t>(it - c.s.begin()) - 1;
  i = std::min(i, c.points.size() - 2);
  const double span = c.s[i + 1] - c.s[i];
  return {i, span > 0 ? (frac - c.s[i]) / span : 0.0};
}

double bilinear(const BinaryMask& m, double row, double col) {
  const int r0 = static_cast<int>(std::floor(row)), c0 = static_cast<int>(std::floor(col));
  const double fr = row - r0, fc = col - c0;
  const auto v = [&](int r, int c) { return m.contains(r, c) && m(r, c) ? 1.0 : 0.0; };
  return (1 - fr) * ((1 - fc) * v(r0, c0) + fc * v(r0, c0 + 1)) + fr * ((1 - fc) * v(r0 + 1, c0) + fc * v(r0 + 1, c0 + 1));
}

// Distance from the centre along +dir until the bilinear mask drops below 0.5.
double march(const BinaryMask& m, Point2 centre, Point2 dir, double reach) {
  constexpr double step = 0.05;
  double prev = bilinear(m, centre.row, centre.col);
  for (double t = step; t <= reach; t += step) {
    const double v = bilinear(m, centre.row + t * dir.row, centre.col + t * dir.col);
    if (v < 0.5) return t - step + step * (prev - 0.5) / (prev - v);
    prev = v;
  }
  return reach;
}

void check_self_intersection(const Centerline& c, double max_radius) {
  const double min_gap = 2.0 * max_radius;
  // Points closer than this along the curve are neighbours, not overlaps.
  const double min_arc = std::numbers::pi * max_radius * 2.0;
  for (std::size_t i = 0; i < c.points.size(); i += 2)
    for (std::size_t j = i + 2; j < c.points.size(); j += 2) {
      if ((c.s[j] - c.s[i]) * c.length < min_arc) continue;
      if (dist(c.points[i], c.points[j]) < min_gap)
        throw Error(ErrorKind::SelfIntersection, "centerline passes within " + std::to_string(min_gap) + " px of itself");
    }
}

BinaryMask tube_mask(const TubeField& f, const std::function<double(double)>& radius) {
  BinaryMask m(f.distance.width(), f.distance.height());
  for (std::size_t i = 0; i < m.size(); ++i) {
    const double r = radius(f.nearest_s[i]);
    m[i] = r >= 0.5 && f.distance[i] <= r + 1e-9;
  }
  return m;
}

// Convex hull (monotone chain) of pixel centres, counter-clockwise.
std::vector<Pixel> convex_hull(std::vector<Pixel> pts) {
  std::sort(pts.begin(), pts.end(), [](Pixel a, Pixel b) { return a.col != b.col ? a.col < b.col : a.row < b.row; });
  pts.erase(std::unique(pts.begin(), pts.end()), pts.end());
  if (pts.size() < 3) return pts;
  const auto cross = [](Pixel o, Pixel a, Pixel b) {
    return static_cast<long>(a.col - o.col) * (b.row - o.row) - static_cast<long>(a.row - o.row) * (b.col - o.col);
  };
  std::vector<Pixel> hull(2 * pts.size());
  std::size_t k = 0;
  for (std::size_t i = 0; i < pts.size(); ++i) {
    while (k >= 2 && cross(hull[k - 2], hull[k - 1], pts[i]) <= 0) --k;
    hull[k++] = pts[i];
  }
  for (std::size_t i = pts.size() - 1, t = k + 1; i > 0; --i) {
    while (k >= t && cross(hull[k - 2], hull[k - 1], pts[i - 1]) <= 0) --k;
    hull[k++] = pts[i - 1];
  }
  hull.resize(k - 1);
  return hull;
}

}  // namespace

Point2 Centerline::at(double frac) const {
  const auto [i, t] = locate(*this, frac);
  return lerp(points[i], points[i + 1], t);
}

Point2 Centerline::tangent(double frac) const {
  const auto [i, t] = locate(*this, frac);
  const double d = dist(points[i], points[i + 1]);
  return {(points[i + 1].row - points[i].row) / d, (points[i + 1].col - points[i].col) / d};
}

Centerline build_centerline(const std::vector<Point2>& control, double spacing) {
  if (control.size() < 3) throw Error(ErrorKind::InvalidArgument, "need at least 3 control points");
  if (!(spacing > 0)) throw Error(ErrorKind::InvalidArgument, "spacing must be positive");
  std::vector<Point2> p;
  p.reserve(control.size() + 2);
  p.push_back(lerp(control[1], control[0], 2.0));
  p.insert(p.end(), control.begin(), control.end());
  p.push_back(lerp(control[control.size() - 2], control.back(), 2.0));

  // Dense sampling of the spline, then uniform resampling in arclength.
  constexpr int kDense = 400;
  std::vector<Point2> dense;
  std::vector<double> arc;
  for (std::size_t seg = 1; seg + 2 < p.size(); ++seg)
    for (int k = 0; k < kDense; ++k) dense.push_back(catmull_rom(p[seg - 1], p[seg], p[seg + 1], p[seg + 2], double(k) / kDense));
  dense.push_back(control.back());
  arc.resize(dense.size(), 0.0);
  for (std::size_t i = 1; i < dense.size(); ++i) arc[i] = arc[i - 1] + dist(dense[i - 1], dense[i]);

  Centerline c;
  c.length = arc.back();
  if (!(c.length > 0)) throw Error(ErrorKind::InvalidArgument, "degenerate centerline");
  const auto n = static_cast<std::size_t>(std::ceil(c.length / spacing));
  std::size_t j = 0;
  for (std::size_t i = 0; i <= n; ++i) {
    const double target = c.length * static_cast<double>(i) / static_cast<double>(n);
    while (j + 2 < arc.size() && arc[j + 1] < target) ++j;
    const double span = arc[j + 1] - arc[j];
    c.points.push_back(lerp(dense[j], dense[j + 1], span > 0 ? std::clamp((target - arc[j]) / span, 0.0, 1.0) : 0.0));
    c.s.push_back(static_cast<double>(i) / static_cast<double>(n));
  }
  return c;
}

void VesselPhantomSpec::validate() const {
  if (height < 8 || width < 8) throw Error(ErrorKind::InvalidArgument, "phantom grid too small");
  if (control.size() < 3) throw Error(ErrorKind::InvalidArgument, "need at least 3 control points");
  if (radius.empty()) throw Error(ErrorKind::InvalidArgument, "empty radius profile");
  for (double r : radius)
    if (!(r > 0)) throw Error(ErrorKind::InvalidArgument, "radii must be positive");
  if (!(vessel < background)) throw Error(ErrorKind::InvalidArgument, "vessel must be darker than background");
  if (!(noise >= 0)) throw Error(ErrorKind::InvalidArgument, "noise must be non-negative");
}

double VesselPhantomSpec::radius_at(double s) const {
  if (radius.size() == 1) return radius[0];
  const double x = std::clamp(s, 0.0, 1.0) * static_cast<double>(radius.size() - 1);
  const auto i = std::min(static_cast<std::size_t>(x), radius.size() - 2);
  return radius[i] + (x - static_cast<double>(i)) * (radius[i + 1] - radius[i]);
}

double VesselPhantomSpec::max_radius() const { return *std::max_element(radius.begin(), radius.end()); }

Location parse_location(std::string_view name) {
  if (name == "proximal") return Location::Proximal;
  if (name == "mid") return Location::Mid;
  if (name == "distal") return Location::Distal;
  if (name == "terminal") return Location::Terminal;
  throw Error(ErrorKind::InvalidArgument, "unknown location '" + std::string(name) + "'");
}

std::string_view to_string(Location loc) {
  switch (loc) {
    case Location::Proximal: return "proximal";
    case Location::Mid: return "mid";
    case Location::Distal: return "distal";
    case Location::Terminal: return "terminal";
  }
  return "?";
}

double location_fraction(Location loc) {
  switch (loc) {
    case Location::Proximal: return 0.15;
    case Location::Mid: return 0.45;
    case Location::Distal: return 0.75;
    case Location::Terminal: return 0.95;
  }
  return 0.5;
}

std::array<double, 2> StenosisSpec::window() const {
  const double s0 = location_fraction(location);
  return {s0 - 0.5 * extent * (1 - asymmetry), s0 + 0.5 * extent * (1 + asymmetry)};
}

double StenosisSpec::weight(double s) const {
  const double s0 = location_fraction(location);
  const auto [lo, hi] = window();
  if (s <= lo || s >= hi) return 0.0;
  const double half = s < s0 ? s0 - lo : hi - s0;
  return 0.5 * (1 + std::cos(std::numbers::pi * (s - s0) / half));
}

void StenosisSpec::validate() const {
  if (!(extent > 0 && extent < 0.5)) throw Error(ErrorKind::InvalidArgument, "extent must lie in (0, 0.5)");
  if (!(severity >= 0 && severity <= 1)) throw Error(ErrorKind::InvalidArgument, "severity must lie in [0, 1]");
  if (!(asymmetry > -1 && asymmetry < 1)) throw Error(ErrorKind::InvalidArgument, "asymmetry must lie in (-1, 1)");
  const auto [lo, hi] = window();
  if (!(lo > 0 && hi < 1)) throw Error(ErrorKind::InvalidArgument, "stenosis window leaves the vessel");
}

TubeField tube_field(const VesselPhantomSpec& spec) {
  spec.validate();
  TubeField f{build_centerline(spec.control), DistanceField(spec.width, spec.height),
              DistanceField(spec.width, spec.height)};
  const auto& pts = f.centerline.points;
  const auto& s = f.centerline.s;
  // Segments grouped in chunks with bounding circles so most chunks are skipped.
  constexpr std::size_t kChunk = 16;
  struct Chunk {
    std::size_t first, last;
    Point2 centre;
    double radius;
  };
  std::vector<Chunk> chunks;
  for (std::size_t i = 0; i + 1 < pts.size(); i += kChunk) {
    const std::size_t last = std::min(i + kChunk, pts.size() - 1);
    const Point2 centre = lerp(pts[i], pts[last], 0.5);
    double radius = 0.0;
    for (std::size_t j = i; j <= last; ++j) radius = std::max(radius, dist(centre, pts[j]));
    chunks.push_back({i, last, centre, radius});
  }
  for (int r = 0; r < spec.height; ++r)
    for (int c = 0; c < spec.width; ++c) {
      double best2 = std::numeric_limits<double>::infinity(), best_s = 0.0;
      for (const Chunk& ch : chunks) {
        const double reach = dist({double(r), double(c)}, ch.centre) - ch.radius;
        if (reach > 0 && reach * reach >= best2) continue;
        for (std::size_t i = ch.first; i < ch.last; ++i) {
          const double er = pts[i + 1].row - pts[i].row, ec = pts[i + 1].col - pts[i].col;
          const double len2 = er * er + ec * ec;
          double t = len2 > 0 ? ((r - pts[i].row) * er + (c - pts[i].col) * ec) / len2 : 0.0;
          t = std::clamp(t, 0.0, 1.0);
          const double dr = r - pts[i].row - t * er, dc = c - pts[i].col - t * ec;
          const double d2 = dr * dr + dc * dc;
          if (d2 < best2) {
            best2 = d2;
            best_s = s[i] + t * (s[i + 1] - s[i]);
          }
        }
      }
      f.distance(r, c) = std::sqrt(best2);
      f.nearest_s(r, c) = best_s;
    }
  return f;
}

namespace {

Phantom render_from_field(const VesselPhantomSpec& spec, const TubeField& f) {
  check_self_intersection(f.centerline, spec.max_radius());
  Phantom ph{GrayImage(spec.width, spec.height), tube_mask(f, [&](double s) { return spec.radius_at(s); }),
             f.centerline};
  std::mt19937_64 gen(mix_seed(spec.seed, 0x5eed));
  std::normal_distribution<double> noise(0.0, spec.noise > 0 ? spec.noise : 1.0);
  for (std::size_t i = 0; i < ph.image.size(); ++i) {
    // Signed distance to the tube surface; 2 px transition centred on it.
    const double g = f.distance[i] - spec.radius_at(f.nearest_s[i]);
    const double inside = 1.0 - smoothstep((g + 1.0) / 2.0);
    double v = spec.background + (spec.vessel - spec.background) * inside;
    if (spec.noise > 0) v += noise(gen);
    ph.image[i] = std::clamp(v, 0.0, 1.0);
  }
  return ph;
}

}  // namespace

Phantom render_phantom(const VesselPhantomSpec& spec) { return render_from_field(spec, tube_field(spec)); }

BinaryMask apply_stenosis_to_mask(const VesselPhantomSpec& spec, const StenosisSpec& sten) {
  return apply_stenosis_to_mask(spec, tube_field(spec), sten);
}

BinaryMask apply_stenosis_to_mask(const VesselPhantomSpec& spec, const TubeField& field, const StenosisSpec& sten) {
  sten.validate();
  return tube_mask(field, [&](double s) { return spec.radius_at(s) * (1.0 - sten.severity * sten.weight(s)); });
}

double cross_section_halfwidth(const BinaryMask& mask, const Centerline& centerline, double s, double reach) {
  const Point2 c = centerline.at(s), t = centerline.tangent(s);
  if (bilinear(mask, c.row, c.col) < 0.5) return 0.0;
  const Point2 n{-t.col, t.row}, m{t.col, -t.row};
  return 0.5 * (march(mask, c, n, reach) + march(mask, c, m, reach));
}

double measure_severity(const BinaryMask& mask, const Centerline& centerline, const StenosisSpec& sten,
                        double reach) {
  const auto [lo, hi] = sten.window();
  const double ds = 0.5 / centerline.length;  // one cross-section every half pixel
  std::vector<double> at, width;
  for (double s = 0.05; s <= 0.95; s += ds) {
    at.push_back(s);
    width.push_back(cross_section_halfwidth(mask, centerline, s, reach));
  }
  // Reference from the un-narrowed flanks next to the window, so tapering
  // along the vessel does not bias it; the rest of the vessel is a fallback.
  const double flank = std::max(hi - lo, 0.1);
  std::vector<double> reference, far;
  double narrowest = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < at.size(); ++i) {
    const std::size_t from = i < 3 ? 0 : i - 3, to = std::min(at.size() - 1, i + 3);
    double mean = 0.0;
    for (std::size_t j = from; j <= to; ++j) mean += width[j];
    mean /= static_cast<double>(to - from + 1);
    if (at[i] >= lo && at[i] <= hi) {
      // Running mean over 7 sections (3 px) so the minimum is not a pixelation outlier.
      narrowest = std::min(narrowest, mean);
    } else if (at[i] >= lo - flank && at[i] <= hi + flank) {
      reference.push_back(width[i]);
    } else {
      far.push_back(width[i]);
    }
  }
  if (reference.empty()) reference = std::move(far);
  if (reference.empty() || !std::isfinite(narrowest))
    throw Error(ErrorKind::NoCrossSection, "no cross-sections inside or outside the window");
  const auto mid = reference.begin() + static_cast<std::ptrdiff_t>(reference.size() / 2);
  std::nth_element(reference.begin(), mid, reference.end());
  if (!(*mid > 0)) throw Error(ErrorKind::NoCrossSection, "vessel absent outside the window");
  return 1.0 - narrowest / *mid;
}

EditCase make_edit_case(const VesselPhantomSpec& spec, const StenosisSpec& sten, double margin) {
  sten.validate();
  const TubeField field = tube_field(spec);
  Phantom ph = render_from_field(spec, field);
  EditCase ec;
  ec.phantom = spec;
  ec.stenosis = sten;
  ec.edited_mask = apply_stenosis_to_mask(spec, field, sten);

  const auto [lo, hi] = sten.window();
  BinaryMask section(spec.width, spec.height);
  std::vector<Pixel> lesion;
  for (int r = 0; r < spec.height; ++r)
    for (int c = 0; c < spec.width; ++c) {
      const double s = field.nearest_s(r, c);
      if (ph.mask(r, c) && s >= lo && s <= hi) {
        section(r, c) = 1;
        lesion.push_back({r, c});
      }
    }
  if (lesion.empty()) throw Error(ErrorKind::EmptyMask, "stenosis window misses the visible vessel");
  ec.M = dilate(unite(symmetric_difference(ph.mask, ec.edited_mask), section), margin);
  ec.S_star = intersect(ec.edited_mask, ec.M);

  int r0 = spec.height, r1 = -1, c0 = spec.width, c1 = -1;
  for (const Pixel& p : lesion) {
    r0 = std::min(r0, p.row);
    r1 = std::max(r1, p.row);
    c0 = std::min(c0, p.col);
    c1 = std::max(c1, p.col);
  }
  ec.annotation.bbox = {double(c0), double(r0), double(c1 - c0 + 1), double(r1 - r0 + 1)};
  for (const Pixel& p : convex_hull(lesion)) {
    ec.annotation.polygon.push_back(p.col);
    ec.annotation.polygon.push_back(p.row);
  }
  ec.annotation.area = static_cast<double>(lesion.size());

  ec.image = std::move(ph.image);
  ec.mask = std::move(ph.mask);
  ec.centerline = std::move(ph.centerline);
  return ec;
}

std::vector<StenosisSpec> sample_edit_distribution(int n, std::uint64_t seed) {
  if (n < 1) throw Error(ErrorKind::InvalidArgument, "sample count must be >= 1");
  std::mt19937_64 gen(seed);
  std::discrete_distribution<int> severity_bin({0.34, 0.37, 0.26, 0.03});
  std::discrete_distribution<int> location({0.34, 0.44, 0.22});
  std::uniform_real_distribution<double> u(0.0, 1.0);
  constexpr double lo[] = {0.25, 0.50, 0.70, 1.0};
  constexpr double hi[] = {0.50, 0.70, 1.00, 1.0};
  std::vector<StenosisSpec> out;
  out.reserve(n);
  for (int i = 0; i < n; ++i) {
    StenosisSpec s;
    const int bin = severity_bin(gen);
    s.severity = lo[bin] + (hi[bin] - lo[bin]) * u(gen);
    if (bin == 2) s.severity = std::min(s.severity, 0.99);
    s.location = static_cast<Location>(location(gen));
    s.extent = 0.10 + 0.10 * u(gen);
    s.asymmetry = -0.5 + u(gen);
    out.push_back(s);
  }
  return out;
}

std::string_view to_string(PhantomStyle style) {
  switch (style) {
    case PhantomStyle::Straight: return "straight";
    case PhantomStyle::Gentle: return "gentle";
    case PhantomStyle::Curved: return "curved";
    case PhantomStyle::Tapered: return "tapered";
  }
  return "?";
}

VesselPhantomSpec random_phantom_spec(std::uint64_t seed, PhantomStyle style, int size) {
  std::mt19937_64 gen(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  VesselPhantomSpec spec;
  spec.height = spec.width = size;
  spec.seed = mix_seed(seed, 1);
  const double amplitude = style == PhantomStyle::Straight ? 0.02 : style == PhantomStyle::Curved ? 0.16 : 0.08;
  const double phase = 2 * std::numbers::pi * u(gen);
  const double centre = size * (0.4 + 0.2 * u(gen));
  constexpr int kPoints = 5;
  for (int i = 0; i < kPoints; ++i) {
    const double x = static_cast<double>(i) / (kPoints - 1);
    spec.control.push_back({centre + amplitude * size * std::sin(phase + 2 * std::numbers::pi * x),
                            -6.0 + x * (size + 11.0)});
  }
  const double r = 4.5 + 1.5 * u(gen);
  spec.radius = style == PhantomStyle::Tapered ? std::vector<double>{r + 0.5, r - 0.5} : std::vector<double>{r};
  return spec;
}

EditCase sample_edit_case(std::uint64_t seed, int index, int size) {
  const std::uint64_t base = mix_seed(seed, static_cast<std::uint64_t>(index));
  const StenosisSpec sten = sample_edit_distribution(1, mix_seed(base, 2))[0];
  for (std::uint64_t attempt = 0;; ++attempt) {
    const auto style = static_cast<PhantomStyle>(mix_seed(base, 3 + attempt) % 4);
    try {
      return make_edit_case(random_phantom_spec(mix_seed(base, 100 + attempt), style, size), sten);
    } catch (const Error& e) {
      if (e.kind() != ErrorKind::SelfIntersection || attempt > 20) throw;
    }
  }
}

}  // namespace otbridge
