#include "otbridge/harness.hpp"

#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

#include "json.hpp"

#include "otbridge/error.hpp"
#include "otbridge/image_io.hpp"
#include "otbridge/metrics.hpp"
#include "otbridge/rng.hpp"
#include "otbridge/transport.hpp"

namespace otbridge {

namespace {

namespace fs = std::filesystem;

// Metric columns shared by the per-case and summary tables.
struct MetricField {
  const char* name;
  double MetricReport::*member;
};

constexpr MetricField kMetricFields[] = {
    {"dice", &MetricReport::dice},
    {"miou", &MetricReport::miou},
    {"boundary_dice", &MetricReport::boundary_dice},
    {"boundary_iou", &MetricReport::boundary_iou},
    {"chamfer", &MetricReport::chamfer},
    {"ssim", &MetricReport::ssim},
    {"psnr", &MetricReport::psnr},
    {"mse", &MetricReport::mse},
    {"final_E", &MetricReport::final_E},
    {"mean_E", &MetricReport::mean_E},
    {"transport_cost", &MetricReport::transport_cost},
};

std::string format_number(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  if (std::isnan(v)) return "nan";
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

std::ofstream open_for_write(const fs::path& path) {
  if (path.has_parent_path()) {
    std::error_code ec;
    fs::create_directories(path.parent_path(), ec);
    if (ec) throw Error(ErrorKind::DiskWrite, "cannot create " + path.parent_path().string() + ": " + ec.message());
  }
  std::ofstream out(path);
  if (!out) throw Error(ErrorKind::DiskWrite, "cannot open " + path.string());
  return out;
}

void finish(std::ofstream& out, const fs::path& path) {
  out.flush();
  if (!out) throw Error(ErrorKind::DiskWrite, "short write to " + path.string());
}

GrayImage zero_inside(const GrayImage& x, const BinaryMask& M) {
  GrayImage out = x;
  for (std::size_t i = 0; i < out.size(); ++i)
    if (M[i]) out[i] = 0.0;
  return out;
}

std::string ratio_label(double r) {
  std::ostringstream os;
  os << "r_" << r;
  return os.str();
}

}  // namespace

void RunConfig::validate() const {
  schedule().validate();
  projection().validate();
  if (!(epsilon > 0)) throw Error(ErrorKind::InvalidArgument, "epsilon must be positive");
  if (K < 1) throw Error(ErrorKind::InvalidArgument, "K must be >= 1");
  if (!(lambda_out >= 0 && lambda_geo >= 0 && lambda_M >= 0))
    throw Error(ErrorKind::InvalidArgument, "penalty weights must be non-negative");
  if (size < 32) throw Error(ErrorKind::InvalidArgument, "phantom size must be >= 32");
  if (!(band >= 1)) throw Error(ErrorKind::InvalidArgument, "band must be >= 1");
}

ProjectionConfig RunConfig::projection() const {
  ProjectionConfig p;
  p.inner_steps = inner_steps;
  p.step_size = step_size;
  p.tau = tau;
  p.beta = beta;
  return p;
}

MetricReport evaluate_edit(const EditCase& ec, const GrayImage& x1, const GuidanceTrace& trace,
                           const RunConfig& cfg) {
  require_same_shape(x1, ec.image, "edited image");
  MetricReport rep;
  const BinaryMask extracted = intersect(hard_structure(x1, cfg.tau), ec.M);
  rep.dice = dice(extracted, ec.S_star, &rep.dice_both_empty);
  rep.miou = miou(extracted, ec.S_star, &ec.M);
  try {
    rep.boundary_dice = boundary_dice(extracted, ec.S_star, cfg.band);
    rep.boundary_iou = boundary_iou(extracted, ec.S_star, cfg.band);
  } catch (const Error& e) {
    if (e.kind() != ErrorKind::DegenerateMask) throw;
  }
  try {
    rep.chamfer = chamfer_distance(extract_boundary(extracted), extract_boundary(ec.S_star));
  } catch (const Error& e) {
    if (e.kind() != ErrorKind::EmptySet) throw;
    rep.chamfer = std::hypot(double(x1.width()), double(x1.height()));
  }

  const GrayImage out1 = zero_inside(x1, ec.M), out0 = zero_inside(ec.image, ec.M);
  rep.ssim = ssim(out1, out0);
  const PsnrMse pm = psnr_mse(out1, out0);
  rep.psnr = pm.psnr;
  rep.psnr_infinite = pm.infinite;
  rep.mse = pm.mse;

  if (trace.records.empty()) {
    const FeasibilitySpec spec(ec.image, ec.M, ec.S_star, cfg.lambda_out, cfg.lambda_geo);
    rep.final_E = rep.mean_E = trace_record(cfg.T, x1, spec, cfg.projection(), false).E;
  } else {
    rep.final_E = trace.final_E();
    rep.mean_E = trace.mean_E();
  }

  const DiscreteMeasure mu0 = DiscreteMeasure::point_mass(ec.image), mu1 = DiscreteMeasure::point_mass(x1);
  const CostMatrix C = build_cost_matrix(mu0, mu1, ec.M, cfg.lambda_M);
  const CouplingPlan plan = sinkhorn_solve(C, mu0, mu1, {.epsilon = cfg.epsilon});
  rep.transport_cost = transport_cost(C.entries, plan.entries);
  return rep;
}

std::string_view to_string(Condition c) {
  switch (c) {
    case Condition::Edge: return "edge";
    case Condition::Seg: return "seg";
    case Condition::Comp: return "comp";
    case Condition::CompNoPreserve: return "comp_no_preserve";
  }
  return "?";
}

Condition parse_condition(std::string_view name) {
  for (Condition c : {Condition::Edge, Condition::Seg, Condition::Comp, Condition::CompNoPreserve})
    if (to_string(c) == name) return c;
  throw Error(ErrorKind::InvalidArgument, "unknown condition '" + std::string(name) + "'");
}

BinaryMask edge_condition_target(const EditCase& ec, double threshold) {
  const CompositeCondition cond = build_composite_condition(ec.image, ec.edited_mask);
  BinaryMask target(ec.M.width(), ec.M.height());
  for (std::size_t i = 0; i < target.size(); ++i) target[i] = ec.M[i] && cond.masked_edge[i] > threshold;
  return target;
}

EditOutcome run_edit(const EditCase& ec, const RunConfig& cfg, const EditRequest& req, std::uint64_t seed) {
  cfg.validate();
  const BinaryMask& M = req.M_override ? *req.M_override : ec.M;
  BinaryMask S = req.S_override ? *req.S_override : ec.S_star;
  if (req.condition == Condition::Edge) S = edge_condition_target(ec, cfg.edge_threshold);

  ProjectionConfig pc = cfg.projection();
  pc.geo_term = req.geo_term;
  AnchorOptions ao;
  ao.tau = cfg.tau;
  if (req.condition == Condition::Seg) pc.geo_term = GeoTerm::RegionOverlap;
  if (req.condition == Condition::CompNoPreserve) {
    pc.hard_preserve = false;
    ao.preserve = false;
  }

  const FeasibilitySpec spec(ec.image, M, intersect(S, M), cfg.lambda_out, cfg.lambda_geo);
  EditOutcome out{build_target_anchor(ec.image, M, spec.S_star(), ao), {}, {}};
  out.result = run_guided_rollout(spec, out.anchor, cfg.schedule(), pc, req.mode, cfg.K, seed);
  out.report = evaluate_edit(ec, out.result.x1, out.result.trace, cfg);
  // The trace discrepancy refers to the supervision the editor saw; report it
  // against the true target instead when the two differ.
  if (req.S_override || req.M_override || req.condition == Condition::Edge) {
    const FeasibilitySpec truth(ec.image, ec.M, ec.S_star, cfg.lambda_out, cfg.lambda_geo);
    double sum = 0.0;
    for (const BridgeState& st : out.result.trajectory) sum += trace_record(st.k, st.image, truth, pc, false).E;
    out.report.mean_E = sum / static_cast<double>(out.result.trajectory.size());
    out.report.final_E = trace_record(cfg.T, out.result.x1, truth, pc, false).E;
  }
  return out;
}

std::vector<EditCase> make_cases(int n, std::uint64_t seed, int size, int threads) {
  return parallel_map<EditCase>(n, threads, [&](int i) { return sample_edit_case(seed, i, size); });
}

std::vector<SummaryRow> summarize(const std::vector<CaseRow>& rows) {
  std::vector<SummaryRow> out;
  std::map<std::pair<std::string, double>, std::vector<const CaseRow*>> groups;
  for (const CaseRow& r : rows) {
    auto& g = groups[{r.setting, r.magnitude}];
    if (g.empty()) out.push_back({r.setting, r.magnitude, 0, {}, {}});
    g.push_back(&r);
  }
  for (SummaryRow& s : out) {
    const auto& g = groups[{s.setting, s.magnitude}];
    s.n = static_cast<int>(g.size());
    for (const MetricField& f : kMetricFields) {
      double mean = 0.0;
      for (const CaseRow* r : g) mean += r->report.*f.member;
      mean /= s.n;
      double var = 0.0;
      for (const CaseRow* r : g) var += (r->report.*f.member - mean) * (r->report.*f.member - mean);
      s.mean.*f.member = mean;
      s.stddev.*f.member = s.n > 1 ? std::sqrt(var / (s.n - 1)) : 0.0;
    }
  }
  return out;
}

namespace {

struct Variant {
  std::string setting;
  double magnitude = 0.0;
  EditRequest request;
};

std::vector<CaseRow> run_variants(const std::vector<EditCase>& cases, const RunConfig& cfg, std::uint64_t seed,
                                  int threads,
                                  const std::function<std::vector<Variant>(const EditCase&, int)>& variants) {
  const auto per_case = parallel_map<std::vector<CaseRow>>(static_cast<int>(cases.size()), threads, [&](int i) {
    std::vector<CaseRow> rows;
    // Paired runs: every variant of a case shares the bridge noise.
    const std::uint64_t case_seed = mix_seed(seed, static_cast<std::uint64_t>(i));
    for (const Variant& v : variants(cases[i], i))
      rows.push_back({i, v.setting, v.magnitude, run_edit(cases[i], cfg, v.request, case_seed).report});
    return rows;
  });
  std::vector<CaseRow> rows;
  for (const auto& r : per_case) rows.insert(rows.end(), r.begin(), r.end());
  return rows;
}

}  // namespace

std::vector<CaseRow> run_domain_ablation(const std::vector<EditCase>& cases, const RunConfig& cfg,
                                         std::uint64_t seed, int threads) {
  return run_variants(cases, cfg, seed, threads, [](const EditCase&, int) {
    std::vector<Variant> v;
    for (Condition c : {Condition::Edge, Condition::Seg, Condition::Comp, Condition::CompNoPreserve}) {
      Variant x{std::string(to_string(c)), 0.0, {}};
      x.request.condition = c;
      v.push_back(std::move(x));
    }
    return v;
  });
}

std::vector<CaseRow> run_gpg_ablation(const std::vector<EditCase>& cases, const RunConfig& cfg, std::uint64_t seed,
                                      int threads) {
  return run_variants(cases, cfg, seed, threads, [](const EditCase&, int) {
    std::vector<Variant> v(3);
    v[0].setting = "every_K";
    v[1].setting = "endpoint_only";
    v[1].request.mode = GuidanceMode::EndpointOnly;
    v[2].setting = "no_boundary_term";
    v[2].request.geo_term = GeoTerm::RegionOverlap;
    return v;
  });
}

std::vector<CaseRow> run_mask_robustness(const std::vector<EditCase>& cases, const std::vector<double>& magnitudes,
                                         const RunConfig& cfg, std::uint64_t seed, int threads) {
  return run_variants(cases, cfg, seed, threads, [&](const EditCase& ec, int i) {
    std::vector<Variant> v;
    v.push_back({"clean", 0.0, {}});
    for (PerturbKind kind : {PerturbKind::Jitter, PerturbKind::ErodeDilate, PerturbKind::Displace}) {
      for (std::size_t m = 0; m < magnitudes.size(); ++m) {
        const std::uint64_t pseed =
            mix_seed(mix_seed(seed ^ 0x726f62ULL, static_cast<std::uint64_t>(i)), 16 * static_cast<int>(kind) + m);
        Variant x{std::string(to_string(kind)), magnitudes[m], {}};
        // The supervision is the edited vessel mask; the editor sees its
        // corrupted version restricted to the (possibly shifted) region.
        if (kind == PerturbKind::Displace) {
          const Displacement d = random_displacement(magnitudes[m], pseed);
          x.request.M_override = translate(ec.M, d.drow, d.dcol);
          x.request.S_override = intersect(translate(ec.edited_mask, d.drow, d.dcol), *x.request.M_override);
        } else {
          x.request.S_override = intersect(perturb_mask(ec.edited_mask, kind, magnitudes[m], pseed), ec.M);
        }
        v.push_back(std::move(x));
      }
    }
    return v;
  });
}

std::vector<SweepManifest> run_scaling_sweep(const SweepConfig& sweep, const RunConfig& cfg, std::uint64_t seed,
                                             int threads) {
  cfg.validate();
  if (sweep.n_real < 0) throw Error(ErrorKind::InvalidArgument, "n_real must be >= 0");
  std::vector<SweepManifest> out;
  for (double r : sweep.ratios) {
    if (!(r >= 0)) throw Error(ErrorKind::InvalidArgument, "ratios must be >= 0");
    const int n = static_cast<int>(std::lround(r * sweep.n_real));
    const fs::path dir = sweep.out_dir / ratio_label(r);
    std::error_code ec;
    fs::create_directories(dir / "images", ec);
    if (ec) throw Error(ErrorKind::DiskWrite, "cannot create " + dir.string() + ": " + ec.message());

    // The same seed for every ratio, so smaller sets are prefixes of larger ones.
    const auto entries = parallel_map<nlohmann::json>(n, threads, [&](int i) {
      const EditCase c = sample_edit_case(seed, i, cfg.size);
      const EditOutcome o = run_edit(c, cfg, {}, mix_seed(seed, static_cast<std::uint64_t>(i)));
      char name[32];
      std::snprintf(name, sizeof name, "synth_%05d.png", i + 1);
      io::write_image(dir / "images" / name, o.result.x1);
      nlohmann::json image = {{"id", i + 1}, {"file_name", std::string("images/") + name},
                              {"width", cfg.size}, {"height", cfg.size}};
      nlohmann::json ann = {{"id", i + 1},
                            {"image_id", i + 1},
                            {"category_id", 1},
                            {"bbox", c.annotation.bbox},
                            {"segmentation", nlohmann::json::array({c.annotation.polygon})},
                            {"area", c.annotation.area},
                            {"iscrowd", 0},
                            {"attributes",
                             {{"severity", c.stenosis.severity},
                              {"location", std::string(to_string(c.stenosis.location))},
                              {"extent", c.stenosis.extent},
                              {"edited_dice", o.report.dice}}}};
      return nlohmann::json{{"image", image}, {"annotation", ann}};
    });
    nlohmann::json manifest = {{"info", {{"description", "synthetic stenosis edits"}, {"ratio", r},
                                         {"n_real", sweep.n_real}, {"n_synth", n}, {"seed", seed}}},
                               {"images", nlohmann::json::array()},
                               {"annotations", nlohmann::json::array()},
                               {"categories", {{{"id", 1}, {"name", "stenosis"}}}}};
    for (const auto& e : entries) {
      manifest["images"].push_back(e["image"]);
      manifest["annotations"].push_back(e["annotation"]);
    }
    const fs::path path = dir / "annotations.json";
    std::ofstream f = open_for_write(path);
    f << manifest.dump(2) << '\n';
    finish(f, path);
    out.push_back({r, n, path});
  }
  return out;
}

const std::vector<std::string>& case_csv_columns() {
  static const std::vector<std::string> cols = [] {
    std::vector<std::string> c = {"case_id", "setting", "magnitude"};
    for (const MetricField& f : kMetricFields) c.emplace_back(f.name);
    return c;
  }();
  return cols;
}

const std::vector<std::string>& summary_csv_columns() {
  static const std::vector<std::string> cols = [] {
    std::vector<std::string> c = {"setting", "magnitude", "n"};
    for (const MetricField& f : kMetricFields) {
      c.push_back(std::string(f.name) + "_mean");
      c.push_back(std::string(f.name) + "_std");
    }
    return c;
  }();
  return cols;
}

const std::vector<std::string>& trace_csv_columns() {
  static const std::vector<std::string> cols = {"step", "E_t", "soft_geo", "protected_residual", "guided", "mode"};
  return cols;
}

namespace {

void write_header(std::ostream& out, const std::vector<std::string>& cols) {
  for (std::size_t i = 0; i < cols.size(); ++i) out << (i ? "," : "") << cols[i];
  out << '\n';
}

}  // namespace

void write_case_csv(const fs::path& path, const std::vector<CaseRow>& rows) {
  std::ofstream out = open_for_write(path);
  write_header(out, case_csv_columns());
  for (const CaseRow& r : rows) {
    out << r.case_id << ',' << r.setting << ',' << format_number(r.magnitude);
    for (const MetricField& f : kMetricFields) out << ',' << format_number(r.report.*f.member);
    out << '\n';
  }
  finish(out, path);
}

void write_summary_csv(const fs::path& path, const std::vector<SummaryRow>& rows) {
  std::ofstream out = open_for_write(path);
  write_header(out, summary_csv_columns());
  for (const SummaryRow& r : rows) {
    out << r.setting << ',' << format_number(r.magnitude) << ',' << r.n;
    for (const MetricField& f : kMetricFields)
      out << ',' << format_number(r.mean.*f.member) << ',' << format_number(r.stddev.*f.member);
    out << '\n';
  }
  finish(out, path);
}

void write_trace_csv(const fs::path& path, const GuidanceTrace& trace, GuidanceMode mode) {
  std::ofstream out = open_for_write(path);
  write_header(out, trace_csv_columns());
  for (const TraceRecord& r : trace.records)
    out << r.k << ',' << format_number(r.E) << ',' << format_number(r.soft_geo) << ','
        << format_number(r.protected_residual) << ',' << (r.guided ? 1 : 0) << ',' << to_string(mode) << '\n';
  finish(out, path);
}

std::vector<CaseRow> read_case_csv(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::Io, "cannot open " + path.string());
  std::string line;
  std::getline(in, line);
  std::vector<CaseRow> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::istringstream fields(line);
    for (std::string cell; std::getline(fields, cell, ',');) cells.push_back(cell);
    if (cells.size() != case_csv_columns().size()) throw Error(ErrorKind::Io, path.string() + ": bad row width");
    CaseRow r;
    r.case_id = std::stoi(cells[0]);
    r.setting = cells[1];
    r.magnitude = std::stod(cells[2]);
    for (std::size_t k = 0; k < std::size(kMetricFields); ++k) r.report.*kMetricFields[k].member = std::stod(cells[3 + k]);
    r.report.psnr_infinite = std::isinf(r.report.psnr);
    rows.push_back(r);
  }
  return rows;
}

}  // namespace otbridge
