#include "otbridge/bridge.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>

#include "otbridge/error.hpp"
#include "otbridge/geometry.hpp"
#include "otbridge/rng.hpp"

namespace otbridge {

namespace {

double median(std::vector<double> v) {
  const auto mid = v.begin() + static_cast<std::ptrdiff_t>(v.size() / 2);
  std::nth_element(v.begin(), mid, v.end());
  if (v.size() % 2 == 1) return *mid;
  const double hi = *mid;
  const double lo = *std::max_element(v.begin(), mid);
  return 0.5 * (lo + hi);
}

// 3x3 mean with the window clipped at the frame, applied where `where` is set.
GrayImage box_smooth(const GrayImage& src, const BinaryMask* where) {
  GrayImage out = src;
  for (int r = 0; r < src.height(); ++r) {
    for (int c = 0; c < src.width(); ++c) {
      if (where && !(*where)(r, c)) continue;
      double sum = 0.0;
      int n = 0;
      for (int dr = -1; dr <= 1; ++dr)
        for (int dc = -1; dc <= 1; ++dc)
          if (src.contains(r + dr, c + dc)) {
            sum += src(r + dr, c + dc);
            ++n;
          }
      out(r, c) = sum / n;
    }
  }
  return out;
}

}  // namespace

void VarianceSchedule::validate() const {
  if (T < 1) throw Error(ErrorKind::InvalidArgument, "schedule needs T >= 1");
  if (!(sigma >= 0.0) || !std::isfinite(sigma)) throw Error(ErrorKind::InvalidArgument, "sigma must be >= 0");
}

double VarianceSchedule::transition_variance(int k) const {
  if (k < 0 || k >= T) throw Error(ErrorKind::StepOutOfRange, "transition index " + std::to_string(k));
  const double remaining = T - k;
  return sigma * sigma / T * (remaining - 1.0) / remaining;
}

double VarianceSchedule::marginal_variance(int k) const {
  const double t = static_cast<double>(k) / T;
  return sigma * sigma * t * (1.0 - t);
}

TargetAnchor build_target_anchor(const GrayImage& x0, const BinaryMask& M, const BinaryMask& S_star,
                                 const AnchorOptions& options) {
  require_same_shape(x0, M, "anchor image/M");
  require_same_shape(x0, S_star, "anchor image/S*");
  if (count(M) == 0) throw Error(ErrorKind::EmptyMask, "editing region is empty");

  const BinaryMask near = dilate(M, options.neighbourhood);
  std::vector<double> vessel, background;
  for (std::size_t i = 0; i < x0.size(); ++i) {
    if (!near[i]) continue;
    (x0[i] < options.tau ? vessel : background).push_back(x0[i]);
  }
  if (vessel.empty() || background.empty())
    throw Error(ErrorKind::InsufficientStatistics, "no vessel or background reference pixels near M");
  const double v_level = median(vessel);
  const double b_level = median(background);

  GrayImage painted = x0;
  for (std::size_t i = 0; i < x0.size(); ++i)
    if (M[i]) painted[i] = S_star[i] ? v_level : b_level;

  GrayImage anchor = box_smooth(painted, options.preserve ? &M : nullptr);
  for (std::size_t i = 0; i < x0.size(); ++i) {
    if (!M[i]) {
      if (options.preserve) anchor[i] = x0[i];
      continue;
    }
    if ((anchor[i] < options.tau) != static_cast<bool>(S_star[i])) anchor[i] = painted[i];
  }
  clamp_unit(anchor);

  std::ostringstream what;
  what << "median fill vessel=" << v_level << " background=" << b_level << " (" << vessel.size() << "/"
       << background.size() << " reference px), 3x3 smoothing " << (options.preserve ? "inside M" : "global");
  return {std::move(anchor), what.str()};
}

BridgeState bridge_transition(const BridgeState& state, const TargetAnchor& anchor, const VarianceSchedule& schedule,
                              std::uint64_t seed) {
  schedule.validate();
  if (state.k < 0 || state.k >= schedule.T)
    throw Error(ErrorKind::StepOutOfRange, "state index " + std::to_string(state.k));
  require_same_shape(state.image, anchor.image, "bridge state/anchor");

  const double remaining = schedule.T - state.k;
  const double sd = std::sqrt(schedule.transition_variance(state.k));
  BridgeState next{state.k + 1, state.image};
  std::mt19937_64 gen(mix_seed(seed, static_cast<std::uint64_t>(state.k)));
  std::normal_distribution<double> noise(0.0, 1.0);
  for (std::size_t i = 0; i < next.image.size(); ++i) {
    const double x = state.image[i];
    double y = anchor.image[i];
    if (remaining > 1.0) {
      y = x + (y - x) / remaining;
      if (sd > 0.0) y += sd * noise(gen);
    }
    next.image[i] = y;
  }
  clamp_unit(next.image);
  return next;
}

BridgeTrajectory rollout(const GrayImage& x0, const TargetAnchor& anchor, const VarianceSchedule& schedule,
                         std::uint64_t seed) {
  schedule.validate();
  BridgeTrajectory path;
  path.reserve(schedule.T + 1);
  path.push_back({0, x0});
  for (int k = 0; k < schedule.T; ++k) path.push_back(bridge_transition(path.back(), anchor, schedule, seed));
  return path;
}

}  // namespace otbridge
