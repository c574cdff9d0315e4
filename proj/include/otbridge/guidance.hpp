#pragma once

#include <cstdint>
#include <string_view>
#include <vector>

#include "otbridge/bridge.hpp"
#include "otbridge/image.hpp"

namespace otbridge {

/// Dark-vessel extractor: soft = sigmoid((tau - x)/beta), hard = x < tau.
GrayImage soft_structure(const GrayImage& x, double tau, double beta);
BinaryMask hard_structure(const GrayImage& x, double tau);

/// Feasibility set: y equals x0 outside M and its extracted lumen inside M is S*.
class FeasibilitySpec {
 public:
  FeasibilitySpec(GrayImage x0, BinaryMask M, BinaryMask S_star, double lambda_out = 10.0, double lambda_geo = 1.0);

  const GrayImage& x0() const { return x0_; }
  const BinaryMask& M() const { return M_; }
  const BinaryMask& S_star() const { return S_star_; }
  /// |phi*|, the unsigned distance to the boundary of S*.
  const DistanceField& target_distance() const { return phi_abs_; }
  double lambda_out = 10.0;
  double lambda_geo = 1.0;

 private:
  GrayImage x0_;
  BinaryMask M_;
  BinaryMask S_star_;
  DistanceField phi_abs_;
};

enum class GeoTerm { Sdt, RegionOverlap };

struct ProjectionConfig {
  int inner_steps = 20;
  double step_size = 0.1;
  double tau = 0.5;
  double beta = 0.05;
  GeoTerm geo_term = GeoTerm::Sdt;
  bool hard_preserve = true;

  void validate() const;
};

/// Boundary of hard(x) restricted to M.
BoundarySet lumen_boundary(const GrayImage& x, const BinaryMask& M, double tau);

/// Mean |phi*| over the boundary of hard(x) inside M. Throws EmptyBoundary.
double geo_discrepancy_sdt(const GrayImage& x, const FeasibilitySpec& spec, double tau = 0.5);

/// Symmetric mean nearest-neighbour distance. Throws EmptySet.
double chamfer_distance(const BoundarySet& a, const BoundarySet& b);

/// IoU of the two boundaries after dilation by `band`. Throws DegenerateMask
/// when either mask has no boundary.
double boundary_iou(const BinaryMask& a, const BinaryMask& b, double band);
/// Dice counterpart of boundary_iou.
double boundary_dice(const BinaryMask& a, const BinaryMask& b, double band);

/// Penalised objective lambda_geo * L_geo + lambda_out * L_out with the soft
/// extractor. L_geo is 0 when the soft boundary carries no weight.
struct ObjectiveTerms {
  double geo = 0.0;
  double out = 0.0;
  double total = 0.0;
};
ObjectiveTerms projection_objective(const GrayImage& y, const FeasibilitySpec& spec, const ProjectionConfig& cfg);
/// Gradient of projection_objective().total with respect to every pixel.
GrayImage projection_gradient(const GrayImage& y, const FeasibilitySpec& spec, const ProjectionConfig& cfg);

GrayImage project_feasible(const GrayImage& x, const FeasibilitySpec& spec, const ProjectionConfig& cfg);

struct TraceRecord {
  int k = 0;
  double E = 0.0;                  // hard boundary discrepancy, image diagonal when no boundary
  double soft_geo = 0.0;           // soft surrogate used for the gradients
  double protected_residual = 0.0; // max |y - x0| outside M
  bool guided = false;
};

struct GuidanceTrace {
  std::vector<TraceRecord> records;

  double final_E() const;
  double mean_E() const;
};

TraceRecord trace_record(int k, const GrayImage& y, const FeasibilitySpec& spec, const ProjectionConfig& cfg,
                         bool guided);

/// Replaces the state image by its projection and logs the result.
BridgeState gpg_step(const BridgeState& state, const FeasibilitySpec& spec, const ProjectionConfig& cfg,
                     GuidanceTrace& trace);

enum class GuidanceMode { EveryK, EndpointOnly, None };
GuidanceMode parse_guidance_mode(std::string_view name);
std::string_view to_string(GuidanceMode mode);

struct GuidedResult {
  GrayImage x1;
  BridgeTrajectory trajectory;
  GuidanceTrace trace;
};

/// Bridge rollout towards `anchor`. EveryK projects the states with index
/// k = K, 2K, ... <= T; EveryK and EndpointOnly then project the terminal
/// state once more. The trace has one record per step 0..T, the last one
/// describing x1.
GuidedResult run_guided_rollout(const FeasibilitySpec& spec, const TargetAnchor& anchor,
                                const VarianceSchedule& schedule, const ProjectionConfig& cfg, GuidanceMode mode,
                                int K, std::uint64_t seed);

}  // namespace otbridge
