#include "otbridge/serialize.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include "otbridge/error.hpp"

namespace otbridge {

namespace {

void check_keys(const json& j, std::initializer_list<const char*> allowed, const char* what) {
  if (!j.is_object()) throw Error(ErrorKind::InvalidArgument, std::string(what) + " must be a JSON object");
  const std::set<std::string> ok(allowed.begin(), allowed.end());
  for (const auto& [key, value] : j.items())
    if (!ok.count(key)) throw Error(ErrorKind::InvalidArgument, std::string(what) + ": unknown key '" + key + "'");
}

template <class T>
void read(const json& j, const char* key, T& out) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw Error(ErrorKind::InvalidArgument, std::string("bad value for '") + key + "': " + e.what());
  }
}

}  // namespace

RunConfig run_config_from_json(const json& j) {
  check_keys(j, {"T", "sigma", "epsilon", "K", "lambda_out", "lambda_geo", "lambda_M", "tau", "beta", "inner_steps",
                 "step_size", "size", "band", "edge_threshold"},
             "run config");
  RunConfig c;
  read(j, "T", c.T);
  read(j, "sigma", c.sigma);
  read(j, "epsilon", c.epsilon);
  read(j, "K", c.K);
  read(j, "lambda_out", c.lambda_out);
  read(j, "lambda_geo", c.lambda_geo);
  read(j, "lambda_M", c.lambda_M);
  read(j, "tau", c.tau);
  read(j, "beta", c.beta);
  read(j, "inner_steps", c.inner_steps);
  read(j, "step_size", c.step_size);
  read(j, "size", c.size);
  read(j, "band", c.band);
  read(j, "edge_threshold", c.edge_threshold);
  c.validate();
  return c;
}

json to_json(const RunConfig& c) {
  return {{"T", c.T},
          {"sigma", c.sigma},
          {"epsilon", c.epsilon},
          {"K", c.K},
          {"lambda_out", c.lambda_out},
          {"lambda_geo", c.lambda_geo},
          {"lambda_M", c.lambda_M},
          {"tau", c.tau},
          {"beta", c.beta},
          {"inner_steps", c.inner_steps},
          {"step_size", c.step_size},
          {"size", c.size},
          {"band", c.band},
          {"edge_threshold", c.edge_threshold}};
}

VesselPhantomSpec phantom_spec_from_json(const json& j) {
  check_keys(j, {"height", "width", "control", "radius", "background", "vessel", "noise", "seed"}, "phantom");
  VesselPhantomSpec s;
  read(j, "height", s.height);
  read(j, "width", s.width);
  std::vector<std::array<double, 2>> control;
  read(j, "control", control);
  s.control.clear();
  for (const auto& p : control) s.control.push_back({p[0], p[1]});
  read(j, "radius", s.radius);
  read(j, "background", s.background);
  read(j, "vessel", s.vessel);
  read(j, "noise", s.noise);
  read(j, "seed", s.seed);
  s.validate();
  return s;
}

json to_json(const VesselPhantomSpec& s) {
  json control = json::array();
  for (const Point2& p : s.control) control.push_back({p.row, p.col});
  return {{"height", s.height}, {"width", s.width},       {"control", control}, {"radius", s.radius},
          {"background", s.background}, {"vessel", s.vessel}, {"noise", s.noise},   {"seed", s.seed}};
}

StenosisSpec stenosis_from_json(const json& j) {
  check_keys(j, {"location", "severity", "extent", "asymmetry"}, "stenosis");
  StenosisSpec s;
  std::string loc(to_string(s.location));
  read(j, "location", loc);
  s.location = parse_location(loc);
  read(j, "severity", s.severity);
  read(j, "extent", s.extent);
  read(j, "asymmetry", s.asymmetry);
  s.validate();
  return s;
}

json to_json(const StenosisSpec& s) {
  return {{"location", std::string(to_string(s.location))},
          {"severity", s.severity},
          {"extent", s.extent},
          {"asymmetry", s.asymmetry}};
}

EditCase edit_case_from_json(const json& j, int size) {
  check_keys(j, {"phantom", "stenosis", "sample"}, "case");
  if (j.contains("sample")) {
    if (j.contains("phantom") || j.contains("stenosis"))
      throw Error(ErrorKind::InvalidArgument, "case: give either 'sample' or 'phantom' + 'stenosis'");
    const json& s = j.at("sample");
    check_keys(s, {"seed", "index"}, "case.sample");
    std::uint64_t seed = 0;
    int index = 0;
    read(s, "seed", seed);
    read(s, "index", index);
    return sample_edit_case(seed, index, size);
  }
  if (!j.contains("phantom") || !j.contains("stenosis"))
    throw Error(ErrorKind::InvalidArgument, "case needs 'phantom' and 'stenosis'");
  return make_edit_case(phantom_spec_from_json(j.at("phantom")), stenosis_from_json(j.at("stenosis")));
}

json case_spec_json(const EditCase& ec) { return {{"phantom", to_json(ec.phantom)}, {"stenosis", to_json(ec.stenosis)}}; }

json to_json(const MetricReport& r) {
  json j = {{"edited_region",
             {{"dice", r.dice},
              {"dice_both_empty", r.dice_both_empty},
              {"miou", r.miou},
              {"boundary_dice", r.boundary_dice},
              {"boundary_iou", r.boundary_iou},
              {"chamfer", r.chamfer}}},
            {"outside_mask", {{"ssim", r.ssim}, {"psnr", nullptr}, {"psnr_infinite", r.psnr_infinite}, {"mse", r.mse}}},
            {"trajectory", {{"final_E", r.final_E}, {"mean_E", r.mean_E}}},
            {"transport_cost", r.transport_cost}};
  if (!r.psnr_infinite) j["outside_mask"]["psnr"] = r.psnr;
  return j;
}

json to_json(const CocoRecord& rec, int id, int image_id) {
  return {{"id", id},
          {"image_id", image_id},
          {"category_id", 1},
          {"bbox", rec.bbox},
          {"segmentation", json::array({rec.polygon})},
          {"area", rec.area},
          {"iscrowd", 0}};
}

GuidanceTrace read_trace_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::Io, "cannot open " + path.string());
  std::string line;
  std::getline(in, line);
  GuidanceTrace trace;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::istringstream fields(line);
    for (std::string cell; std::getline(fields, cell, ',');) cells.push_back(cell);
    if (cells.size() != trace_csv_columns().size()) throw Error(ErrorKind::Io, path.string() + ": bad trace row");
    try {
      trace.records.push_back({std::stoi(cells[0]), std::stod(cells[1]), std::stod(cells[2]), std::stod(cells[3]),
                               cells[4] == "1"});
    } catch (const std::exception&) {
      throw Error(ErrorKind::Io, path.string() + ": bad number in trace");
    }
  }
  return trace;
}

json load_json(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::Io, "cannot open " + path.string());
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw Error(ErrorKind::InvalidArgument, path.string() + ": " + e.what());
  }
}

void save_json(const std::filesystem::path& path, const json& j) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw Error(ErrorKind::DiskWrite, "cannot open " + path.string());
  out << j.dump(2) << '\n';
  out.flush();
  if (!out) throw Error(ErrorKind::DiskWrite, "short write to " + path.string());
}

}  // namespace otbridge
