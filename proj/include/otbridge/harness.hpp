#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "otbridge/bridge.hpp"
#include "otbridge/geometry.hpp"
#include "otbridge/guidance.hpp"
#include "otbridge/phantom.hpp"

namespace otbridge {

/// All pipeline hyperparameters; defaults are the reference operating point.
struct RunConfig {
  int T = 50;
  double sigma = 0.05;
  double epsilon = 1e-2;
  int K = 5;
  double lambda_out = 10.0;
  double lambda_geo = 1.0;
  double lambda_M = 1.0;
  double tau = 0.5;
  double beta = 0.05;
  int inner_steps = 20;
  double step_size = 0.1;
  int size = 128;
  double band = 2.0;           // boundary Dice/IoU band, px
  double edge_threshold = 0.1; // support of the edge-only condition

  void validate() const;
  VarianceSchedule schedule() const { return {T, sigma}; }
  ProjectionConfig projection() const;
};

struct MetricReport {
  // Edited region (inside M): extracted lumen vs S*.
  double dice = 0.0;
  bool dice_both_empty = false;
  double miou = 0.0;
  double boundary_dice = 0.0;
  double boundary_iou = 0.0;
  double chamfer = 0.0;
  // Outside M: x1 vs x0, both with M zeroed.
  double ssim = 0.0;
  double psnr = 0.0;
  bool psnr_infinite = false;
  double mse = 0.0;
  // Trajectory.
  double final_E = 0.0;
  double mean_E = 0.0;
  // Mask-aware transport cost between x0 and x1 (point-mass coupling).
  double transport_cost = 0.0;
};

/// Scores x1 against the case's own M and S*. Boundary metrics fall back to
/// 0 (and chamfer to the image diagonal) when the extracted lumen has no
/// boundary inside M.
MetricReport evaluate_edit(const EditCase& ec, const GrayImage& x1, const GuidanceTrace& trace,
                           const RunConfig& cfg);

/// Conditioning settings of the domain ablation.
enum class Condition { Edge, Seg, Comp, CompNoPreserve };
std::string_view to_string(Condition c);
Condition parse_condition(std::string_view name);

/// Target lumen recovered from the edge-only condition e*m~: the pixels of M
/// where the masked Sobel response exceeds `threshold`.
BinaryMask edge_condition_target(const EditCase& ec, double threshold);

struct EditRequest {
  Condition condition = Condition::Comp;
  GuidanceMode mode = GuidanceMode::EveryK;
  GeoTerm geo_term = GeoTerm::Sdt;
  // Supervision actually given to the editor; the case's own masks when unset.
  std::optional<BinaryMask> S_override;
  std::optional<BinaryMask> M_override;
};

struct EditOutcome {
  TargetAnchor anchor;
  GuidedResult result;
  MetricReport report;
};

/// Anchor + guided rollout + evaluation against the true case masks.
EditOutcome run_edit(const EditCase& ec, const RunConfig& cfg, const EditRequest& req, std::uint64_t seed);

/// Runs fn(0..n-1) on up to `threads` workers; results keep index order.
template <class T>
std::vector<T> parallel_map(int n, int threads, const std::function<T(int)>& fn);

std::vector<EditCase> make_cases(int n, std::uint64_t seed, int size = 128, int threads = 1);

struct CaseRow {
  int case_id = 0;
  std::string setting;
  double magnitude = 0.0;
  MetricReport report;
};

struct SummaryRow {
  std::string setting;
  double magnitude = 0.0;
  int n = 0;
  MetricReport mean;
  MetricReport stddev;
};

/// Groups rows by (setting, magnitude) in first-appearance order.
std::vector<SummaryRow> summarize(const std::vector<CaseRow>& rows);

/// Edge / Seg / Comp / C w/o P on every case.
std::vector<CaseRow> run_domain_ablation(const std::vector<EditCase>& cases, const RunConfig& cfg,
                                         std::uint64_t seed, int threads = 1);

/// every_K / endpoint_only / no_boundary_term on every case.
std::vector<CaseRow> run_gpg_ablation(const std::vector<EditCase>& cases, const RunConfig& cfg, std::uint64_t seed,
                                      int threads = 1);

/// Clean run plus jitter, erode_dilate and displace of the supervision at each
/// magnitude. Jitter and erode_dilate corrupt S*; displace shifts S* and M.
/// Scoring always uses the true masks.
std::vector<CaseRow> run_mask_robustness(const std::vector<EditCase>& cases, const std::vector<double>& magnitudes,
                                         const RunConfig& cfg, std::uint64_t seed, int threads = 1);

struct SweepConfig {
  std::vector<double> ratios = {0.0, 0.1, 0.25, 0.5, 1.0, 2.0};
  int n_real = 40;
  std::filesystem::path out_dir = "sweep";
};

struct SweepManifest {
  double ratio = 0.0;
  int n_synth = 0;
  std::filesystem::path manifest;
};

/// For each ratio r writes round(r * n_real) guided edits and a COCO manifest
/// under out_dir/r_<r>/. Throws DiskWrite when outputs cannot be written.
std::vector<SweepManifest> run_scaling_sweep(const SweepConfig& sweep, const RunConfig& cfg, std::uint64_t seed,
                                             int threads = 1);

// Tabular outputs.
const std::vector<std::string>& case_csv_columns();
const std::vector<std::string>& summary_csv_columns();
const std::vector<std::string>& trace_csv_columns();
void write_case_csv(const std::filesystem::path& path, const std::vector<CaseRow>& rows);
void write_summary_csv(const std::filesystem::path& path, const std::vector<SummaryRow>& rows);
void write_trace_csv(const std::filesystem::path& path, const GuidanceTrace& trace, GuidanceMode mode);
std::vector<CaseRow> read_case_csv(const std::filesystem::path& path);

}  // namespace otbridge

#include "otbridge/detail/parallel.hpp"
