#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "otbridge/image.hpp"

namespace otbridge {

/// Discretised Brownian reference with T steps of size 1/T and diffusion scale sigma.
struct VarianceSchedule {
  int T = 50;
  double sigma = 0.05;

  void validate() const;
  /// Conditional variance of the endpoint-pinned transition k -> k+1.
  /// Vanishes at k = T-1.
  double transition_variance(int k) const;
  /// Marginal variance of the bridge at step k, sigma^2 t (1-t).
  double marginal_variance(int k) const;
};

struct BridgeState {
  int k = 0;
  GrayImage image;
};

using BridgeTrajectory = std::vector<BridgeState>;

struct TargetAnchor {
  GrayImage image;
  std::string provenance;
};

struct AnchorOptions {
  double tau = 0.5;           // vessel/background split of x0 for reference statistics
  double neighbourhood = 5.0; // radius of the dilation of M where references are collected
  bool preserve = true;       // false: smooth everywhere and skip the protected rewrite
};

/// Paints S* with the local vessel intensity and M \ S* with the local
/// background intensity, smooths inside M and keeps x0 outside M.
/// Pixels whose vessel/background class was flipped by smoothing are reset to
/// the painted value, so thresholding the anchor at tau inside M gives S*.
TargetAnchor build_target_anchor(const GrayImage& x0, const BinaryMask& M, const BinaryMask& S_star,
                                 const AnchorOptions& options = {});

BridgeState bridge_transition(const BridgeState& state, const TargetAnchor& anchor, const VarianceSchedule& schedule,
                              std::uint64_t seed);

/// T+1 states starting at x0. Step k draws its noise from mix_seed(seed, k).
BridgeTrajectory rollout(const GrayImage& x0, const TargetAnchor& anchor, const VarianceSchedule& schedule,
                         std::uint64_t seed);

/// Pixel-space decoder.
inline const GrayImage& decode(const BridgeState& state) { return state.image; }

}  // namespace otbridge
