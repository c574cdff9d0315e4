#include "otbridge/guidance.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "otbridge/distance.hpp"
#include "otbridge/error.hpp"
#include "otbridge/geometry.hpp"

namespace otbridge {

namespace {

constexpr int kDr[4] = {-1, 1, 0, 0};
constexpr int kDc[4] = {0, 0, -1, 1};

// Soft lumen restricted to M: zero outside M, as the hard extraction of x*M.
GrayImage soft_in_region(const GrayImage& y, const BinaryMask& M, const ProjectionConfig& cfg) {
  GrayImage s = soft_structure(y, cfg.tau, cfg.beta);
  for (std::size_t i = 0; i < s.size(); ++i)
    if (!M[i]) s[i] = 0.0;
  return s;
}

double at(const GrayImage& s, int r, int c) { return s.contains(r, c) ? s(r, c) : 0.0; }

// Product of the soft lumen over the 4-neighbours of (r, c), skipping `skip`.
double neighbour_product(const GrayImage& s, int r, int c, int skip = -1) {
  double p = 1.0;
  for (int d = 0; d < 4; ++d)
    if (d != skip) p *= at(s, r + kDr[d], c + kDc[d]);
  return p;
}

// Soft boundary b = s (1 - prod_N4 s), mirroring extract_boundary on hard(x)*M.
GrayImage soft_boundary(const GrayImage& s, const BinaryMask& M) {
  GrayImage b(s.width(), s.height(), 0.0);
  for (int r = 0; r < s.height(); ++r)
    for (int c = 0; c < s.width(); ++c)
      if (M(r, c)) b(r, c) = s(r, c) * (1.0 - neighbour_product(s, r, c));
  return b;
}

struct SdtLoss {
  double value = 0.0;
  double weight = 0.0;
};

SdtLoss soft_sdt_loss(const GrayImage& b, const DistanceField& phi) {
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < b.size(); ++i) {
    num += b[i] * phi[i];
    den += b[i];
  }
  if (den <= 1e-300) return {};
  return {num / den, den};
}

double region_overlap_loss(const GrayImage& s, const BinaryMask& M, const BinaryMask& S) {
  double inter = 0.0, total = 0.0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (!M[i]) continue;
    inter += s[i] * S[i];
    total += s[i] + S[i];
  }
  return total > 0.0 ? 1.0 - 2.0 * inter / total : 0.0;
}

bool is_feasible(const GrayImage& y, const FeasibilitySpec& spec, const ProjectionConfig& cfg) {
  for (std::size_t i = 0; i < y.size(); ++i) {
    if (spec.M()[i]) {
      if ((y[i] < cfg.tau) != static_cast<bool>(spec.S_star()[i])) return false;
    } else if (y[i] != spec.x0()[i]) {
      return false;
    }
  }
  return true;
}

void restore_protected(GrayImage& y, const FeasibilitySpec& spec) {
  for (std::size_t i = 0; i < y.size(); ++i)
    if (!spec.M()[i]) y[i] = spec.x0()[i];
}

}  // namespace

GrayImage soft_structure(const GrayImage& x, double tau, double beta) {
  if (!(tau > 0.0 && tau < 1.0)) throw Error(ErrorKind::InvalidArgument, "tau must lie in (0, 1)");
  if (!(beta > 0.0)) throw Error(ErrorKind::InvalidArgument, "beta must be positive");
  GrayImage s(x.width(), x.height());
  for (std::size_t i = 0; i < x.size(); ++i) s[i] = 1.0 / (1.0 + std::exp((x[i] - tau) / beta));
  return s;
}

BinaryMask hard_structure(const GrayImage& x, double tau) {
  if (!(tau > 0.0 && tau < 1.0)) throw Error(ErrorKind::InvalidArgument, "tau must lie in (0, 1)");
  BinaryMask m(x.width(), x.height());
  for (std::size_t i = 0; i < x.size(); ++i) m[i] = x[i] < tau;
  return m;
}

FeasibilitySpec::FeasibilitySpec(GrayImage x0, BinaryMask M, BinaryMask S_star, double lambda_out_,
                                 double lambda_geo_)
    : lambda_out(lambda_out_), lambda_geo(lambda_geo_), x0_(std::move(x0)), M_(std::move(M)),
      S_star_(std::move(S_star)) {
  require_same_shape(x0_, M_, "feasibility x0/M");
  require_same_shape(x0_, S_star_, "feasibility x0/S*");
  if (!(lambda_out >= 0.0) || !(lambda_geo >= 0.0))
    throw Error(ErrorKind::InvalidArgument, "penalty weights must be non-negative");
  S_star_ = intersect(S_star_, M_);
  const BoundarySet target = extract_boundary(S_star_);
  if (target.pixels.empty()) throw Error(ErrorKind::EmptyBoundary, "target geometry has no boundary inside M");
  phi_abs_ = euclidean_distance_transform(rasterize(target, x0_.width(), x0_.height()));
}

void ProjectionConfig::validate() const {
  if (inner_steps < 1) throw Error(ErrorKind::InvalidArgument, "inner_steps must be >= 1");
  if (!(step_size > 0.0)) throw Error(ErrorKind::InvalidArgument, "step_size must be positive");
  if (!(beta > 0.0)) throw Error(ErrorKind::InvalidArgument, "beta must be positive");
  if (!(tau > 0.0 && tau < 1.0)) throw Error(ErrorKind::InvalidArgument, "tau must lie in (0, 1)");
}

BoundarySet lumen_boundary(const GrayImage& x, const BinaryMask& M, double tau) {
  return extract_boundary(intersect(hard_structure(x, tau), M));
}

double geo_discrepancy_sdt(const GrayImage& x, const FeasibilitySpec& spec, double tau) {
  require_same_shape(x, spec.M(), "discrepancy image/M");
  const BoundarySet b = lumen_boundary(x, spec.M(), tau);
  if (b.pixels.empty()) throw Error(ErrorKind::EmptyBoundary, "no lumen boundary inside M");
  double sum = 0.0;
  for (const Pixel& p : b.pixels) sum += spec.target_distance()(p.row, p.col);
  return sum / static_cast<double>(b.pixels.size());
}

double chamfer_distance(const BoundarySet& a, const BoundarySet& b) {
  if (a.pixels.empty() || b.pixels.empty()) throw Error(ErrorKind::EmptySet, "chamfer distance of an empty set");
  const auto directed = [](const std::vector<Pixel>& from, const std::vector<Pixel>& to) {
    double sum = 0.0;
    for (const Pixel& p : from) {
      long best = std::numeric_limits<long>::max();
      for (const Pixel& q : to) {
        const long dr = p.row - q.row, dc = p.col - q.col;
        best = std::min(best, dr * dr + dc * dc);
      }
      sum += std::sqrt(static_cast<double>(best));
    }
    return sum / static_cast<double>(from.size());
  };
  return 0.5 * (directed(a.pixels, b.pixels) + directed(b.pixels, a.pixels));
}

namespace {

std::pair<std::size_t, std::size_t> band_overlap(const BinaryMask& a, const BinaryMask& b, double band,
                                                  std::size_t& size_a, std::size_t& size_b) {
  require_same_shape(a, b, "boundary metric");
  if (!(band >= 1.0)) throw Error(ErrorKind::InvalidArgument, "band must be >= 1");
  const BoundarySet ba = extract_boundary(a), bb = extract_boundary(b);
  if (ba.pixels.empty() || bb.pixels.empty()) throw Error(ErrorKind::DegenerateMask, "mask without boundary");
  const BinaryMask da = dilate(rasterize(ba, a.width(), a.height()), band);
  const BinaryMask db = dilate(rasterize(bb, b.width(), b.height()), band);
  size_a = count(da);
  size_b = count(db);
  return {count(intersect(da, db)), count(unite(da, db))};
}

}  // namespace

double boundary_iou(const BinaryMask& a, const BinaryMask& b, double band) {
  std::size_t na = 0, nb = 0;
  const auto [inter, uni] = band_overlap(a, b, band, na, nb);
  return static_cast<double>(inter) / static_cast<double>(uni);
}

double boundary_dice(const BinaryMask& a, const BinaryMask& b, double band) {
  std::size_t na = 0, nb = 0;
  const auto [inter, uni] = band_overlap(a, b, band, na, nb);
  return 2.0 * static_cast<double>(inter) / static_cast<double>(na + nb);
}

ObjectiveTerms projection_objective(const GrayImage& y, const FeasibilitySpec& spec, const ProjectionConfig& cfg) {
  require_same_shape(y, spec.x0(), "projection image");
  ObjectiveTerms t;
  const GrayImage s = soft_in_region(y, spec.M(), cfg);
  if (cfg.geo_term == GeoTerm::Sdt) {
    t.geo = soft_sdt_loss(soft_boundary(s, spec.M()), spec.target_distance()).value;
  } else {
    t.geo = region_overlap_loss(s, spec.M(), spec.S_star());
  }
  for (std::size_t i = 0; i < y.size(); ++i) {
    if (spec.M()[i]) continue;
    const double d = y[i] - spec.x0()[i];
    t.out += d * d;
  }
  t.total = spec.lambda_geo * t.geo + spec.lambda_out * t.out;
  return t;
}

GrayImage projection_gradient(const GrayImage& y, const FeasibilitySpec& spec, const ProjectionConfig& cfg) {
  require_same_shape(y, spec.x0(), "projection image");
  const BinaryMask& M = spec.M();
  const GrayImage s = soft_in_region(y, M, cfg);
  GrayImage ds(y.width(), y.height(), 0.0);  // d L_geo / d s

  if (cfg.geo_term == GeoTerm::Sdt) {
    const GrayImage b = soft_boundary(s, M);
    const DistanceField& phi = spec.target_distance();
    const SdtLoss loss = soft_sdt_loss(b, phi);
    if (loss.weight > 0.0) {
      for (int r = 0; r < y.height(); ++r)
        for (int c = 0; c < y.width(); ++c) {
          if (!M(r, c)) continue;
          const double w = (phi(r, c) - loss.value) / loss.weight;  // d L / d b(r, c)
          ds(r, c) += w * (1.0 - neighbour_product(s, r, c));
          // b(r, c) also depends on each neighbour's s through the product.
          for (int d = 0; d < 4; ++d) {
            const int rr = r + kDr[d], cc = c + kDc[d];
            if (!s.contains(rr, cc) || !M(rr, cc)) continue;
            ds(rr, cc) -= w * s(r, c) * neighbour_product(s, r, c, d);
          }
        }
    }
  } else {
    double inter = 0.0, total = 0.0;
    for (std::size_t i = 0; i < s.size(); ++i) {
      if (!M[i]) continue;
      inter += s[i] * spec.S_star()[i];
      total += s[i] + spec.S_star()[i];
    }
    if (total > 0.0)
      for (std::size_t i = 0; i < s.size(); ++i)
        if (M[i]) ds[i] = -2.0 * (spec.S_star()[i] * total - inter) / (total * total);
  }

  GrayImage grad(y.width(), y.height(), 0.0);
  for (std::size_t i = 0; i < y.size(); ++i) {
    if (M[i]) {
      grad[i] = spec.lambda_geo * ds[i] * (-s[i] * (1.0 - s[i]) / cfg.beta);
    } else {
      grad[i] = spec.lambda_out * 2.0 * (y[i] - spec.x0()[i]);
    }
  }
  return grad;
}

GrayImage project_feasible(const GrayImage& x, const FeasibilitySpec& spec, const ProjectionConfig& cfg) {
  cfg.validate();
  require_same_shape(x, spec.x0(), "projection image");
  GrayImage y = x;
  if (cfg.hard_preserve) restore_protected(y, spec);
  clamp_unit(y);
  if (is_feasible(y, spec, cfg)) return y;

  double eta = cfg.step_size;
  double J = projection_objective(y, spec, cfg).total;
  GrayImage trial(y.width(), y.height());
  for (int step = 0; step < cfg.inner_steps && eta > 1e-12; ++step) {
    const GrayImage g = projection_gradient(y, spec, cfg);
    // Halve the step until the objective does not increase.
    while (eta > 1e-12) {
      for (std::size_t i = 0; i < y.size(); ++i) trial[i] = std::clamp(y[i] - eta * g[i], 0.0, 1.0);
      const double Jt = projection_objective(trial, spec, cfg).total;
      if (Jt <= J) {
        std::swap(y, trial);
        J = Jt;
        break;
      }
      eta *= 0.5;
    }
  }
  if (cfg.hard_preserve) restore_protected(y, spec);
  return y;
}

double GuidanceTrace::final_E() const {
  if (records.empty()) throw Error(ErrorKind::InvalidArgument, "empty guidance trace");
  return records.back().E;
}

double GuidanceTrace::mean_E() const {
  if (records.empty()) throw Error(ErrorKind::InvalidArgument, "empty guidance trace");
  double sum = 0.0;
  for (const TraceRecord& r : records) sum += r.E;
  return sum / static_cast<double>(records.size());
}

TraceRecord trace_record(int k, const GrayImage& y, const FeasibilitySpec& spec, const ProjectionConfig& cfg,
                         bool guided) {
  TraceRecord rec{k, 0.0, 0.0, 0.0, guided};
  try {
    rec.E = geo_discrepancy_sdt(y, spec, cfg.tau);
  } catch (const Error& e) {
    if (e.kind() != ErrorKind::EmptyBoundary) throw;
    rec.E = std::hypot(static_cast<double>(y.width()), static_cast<double>(y.height()));
  }
  rec.soft_geo = projection_objective(y, spec, cfg).geo;
  for (std::size_t i = 0; i < y.size(); ++i)
    if (!spec.M()[i]) rec.protected_residual = std::max(rec.protected_residual, std::abs(y[i] - spec.x0()[i]));
  return rec;
}

BridgeState gpg_step(const BridgeState& state, const FeasibilitySpec& spec, const ProjectionConfig& cfg,
                     GuidanceTrace& trace) {
  BridgeState out{state.k, project_feasible(state.image, spec, cfg)};
  trace.records.push_back(trace_record(out.k, out.image, spec, cfg, true));
  return out;
}

GuidanceMode parse_guidance_mode(std::string_view name) {
  if (name == "every_K" || name == "every_k") return GuidanceMode::EveryK;
  if (name == "endpoint_only") return GuidanceMode::EndpointOnly;
  if (name == "none") return GuidanceMode::None;
  throw Error(ErrorKind::InvalidArgument, "unknown guidance mode '" + std::string(name) + "'");
}

std::string_view to_string(GuidanceMode mode) {
  switch (mode) {
    case GuidanceMode::EveryK: return "every_K";
    case GuidanceMode::EndpointOnly: return "endpoint_only";
    case GuidanceMode::None: return "none";
  }
  return "?";
}

GuidedResult run_guided_rollout(const FeasibilitySpec& spec, const TargetAnchor& anchor,
                                const VarianceSchedule& schedule, const ProjectionConfig& cfg, GuidanceMode mode,
                                int K, std::uint64_t seed) {
  schedule.validate();
  cfg.validate();
  if (mode == GuidanceMode::EveryK && K < 1) throw Error(ErrorKind::InvalidArgument, "K must be >= 1");

  GuidedResult res;
  res.trajectory.reserve(schedule.T + 1);
  res.trajectory.push_back({0, spec.x0()});
  res.trace.records.push_back(trace_record(0, spec.x0(), spec, cfg, false));
  for (int k = 0; k < schedule.T; ++k) {
    BridgeState next = bridge_transition(res.trajectory.back(), anchor, schedule, seed);
    if (mode == GuidanceMode::EveryK && next.k % K == 0) {
      next = gpg_step(next, spec, cfg, res.trace);
    } else {
      res.trace.records.push_back(trace_record(next.k, next.image, spec, cfg, false));
    }
    res.trajectory.push_back(std::move(next));
  }
  if (mode != GuidanceMode::None) {
    BridgeState& last = res.trajectory.back();
    last.image = project_feasible(last.image, spec, cfg);
    res.trace.records.back() = trace_record(last.k, last.image, spec, cfg, true);
  }
  res.x1 = res.trajectory.back().image;
  return res;
}

}  // namespace otbridge
