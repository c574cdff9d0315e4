// Command-line front end. Every artifact is a pure function of (config, seed).

#include <cstdio>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "otbridge/error.hpp"
#include "otbridge/harness.hpp"
#include "otbridge/image_io.hpp"
#include "otbridge/serialize.hpp"

namespace fs = std::filesystem;
using namespace otbridge;

namespace {

// Raised while reading flags and config; maps to exit code 2.
struct BadArguments : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct Options {
  std::string config;
  std::uint64_t seed = 0;
  std::string out_dir = "out";
  int threads = 1;
  // Subcommand flags; negative / empty means "take from config".
  int count = -1;
  int cases = -1;
  int n_real = -1;
  std::string mode;
  std::string condition;
  std::string image;
  std::string trace;
  std::vector<double> magnitudes;
  std::vector<double> ratios;
};

// A config file is a JSON object. Case keys (phantom/stenosis/sample) may sit
// at top level so that case.json written by `phantom` is a valid config.
struct Config {
  RunConfig run;
  json case_spec;
  std::string mode = "every_K";
  std::string condition = "comp";
  int count = 10;
  int cases = 20;
  std::vector<double> magnitudes = {1, 2, 4};
  SweepConfig sweep;
};

template <class T>
void take(const json& j, const char* key, T& out) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw BadArguments(std::string("config key '") + key + "': " + e.what());
  }
}

Config load_config(const Options& opt) {
  Config c;
  if (opt.config.empty()) return c;
  json j;
  try {
    j = load_json(opt.config);
  } catch (const Error& e) {
    throw BadArguments(e.what());
  }
  if (!j.is_object()) throw BadArguments("config must be a JSON object");
  for (const auto& [key, value] : j.items()) {
    static const std::vector<std::string> known = {"run",   "phantom", "stenosis",   "sample", "mode",
                                                   "condition", "count", "cases", "magnitudes", "sweep"};
    if (std::find(known.begin(), known.end(), key) == known.end())
      throw BadArguments("config: unknown key '" + key + "'");
  }
  try {
    if (j.contains("run")) c.run = run_config_from_json(j.at("run"));
  } catch (const Error& e) {
    throw BadArguments(e.what());
  }
  for (const char* key : {"phantom", "stenosis", "sample"})
    if (j.contains(key)) c.case_spec[key] = j.at(key);
  take(j, "mode", c.mode);
  take(j, "condition", c.condition);
  take(j, "count", c.count);
  take(j, "cases", c.cases);
  take(j, "magnitudes", c.magnitudes);
  if (j.contains("sweep")) {
    const json& s = j.at("sweep");
    if (!s.is_object()) throw BadArguments("config: 'sweep' must be an object");
    for (const auto& [key, value] : s.items())
      if (key != "ratios" && key != "n_real") throw BadArguments("config.sweep: unknown key '" + key + "'");
    take(s, "ratios", c.sweep.ratios);
    take(s, "n_real", c.sweep.n_real);
  }
  return c;
}

Config resolve(const Options& opt) {
  Config c = load_config(opt);
  if (opt.count >= 0) c.count = opt.count;
  if (opt.cases >= 0) c.cases = opt.cases;
  if (opt.n_real >= 0) c.sweep.n_real = opt.n_real;
  if (!opt.mode.empty()) c.mode = opt.mode;
  if (!opt.condition.empty()) c.condition = opt.condition;
  if (!opt.magnitudes.empty()) c.magnitudes = opt.magnitudes;
  if (!opt.ratios.empty()) c.sweep.ratios = opt.ratios;
  if (opt.threads < 1) throw BadArguments("--threads must be >= 1");
  if (c.count < 0 || c.cases < 1) throw BadArguments("count must be >= 0 and cases >= 1");
  try {
    parse_guidance_mode(c.mode);
    parse_condition(c.condition);
  } catch (const Error& e) {
    throw BadArguments(e.what());
  }
  return c;
}

EditCase load_case(const Config& c, const Options& opt) {
  if (c.case_spec.is_null()) return sample_edit_case(opt.seed, 0, c.run.size);
  return edit_case_from_json(c.case_spec, c.run.size);
}

void write_case_dir(const fs::path& dir, const EditCase& ec) {
  fs::create_directories(dir);
  io::write_image(dir / "image.png", ec.image);
  io::write_image(dir / "image.csv", ec.image);
  io::write_mask(dir / "mask.png", ec.mask);
  io::write_mask(dir / "edited_mask.png", ec.edited_mask);
  io::write_mask(dir / "M.png", ec.M);
  io::write_mask(dir / "S_star.png", ec.S_star);
  save_json(dir / "case.json", case_spec_json(ec));
}

int cmd_phantom(const Options& opt) {
  const Config c = resolve(opt);
  const fs::path out = opt.out_dir;
  json coco = {{"info", {{"description", "synthetic vessel phantoms"}, {"seed", opt.seed}}},
               {"images", json::array()},
               {"annotations", json::array()},
               {"categories", json::array({{{"id", 1}, {"name", "stenosis"}}})}};
  for (int i = 0; i < c.count; ++i) {
    const EditCase ec = sample_edit_case(opt.seed, i, c.run.size);
    char name[32];
    std::snprintf(name, sizeof name, "case_%04d", i);
    write_case_dir(out / name, ec);
    coco["images"].push_back({{"id", i + 1},
                              {"file_name", std::string(name) + "/image.png"},
                              {"height", ec.image.height()},
                              {"width", ec.image.width()}});
    json ann = to_json(ec.annotation, i + 1, i + 1);
    ann["attributes"] = to_json(ec.stenosis);
    coco["annotations"].push_back(ann);
  }
  save_json(out / "annotations.json", coco);
  return 0;
}

int cmd_edit(const Options& opt) {
  const Config c = resolve(opt);
  const EditCase ec = load_case(c, opt);
  EditRequest req;
  req.condition = parse_condition(c.condition);
  req.mode = parse_guidance_mode(c.mode);
  const EditOutcome res = run_edit(ec, c.run, req, opt.seed);
  const fs::path out = opt.out_dir;
  fs::create_directories(out);
  io::write_image(out / "x1.png", res.result.x1);
  io::write_image(out / "x1.csv", res.result.x1);
  io::write_image(out / "anchor.png", res.anchor.image);
  io::write_image(out / "anchor.csv", res.anchor.image);
  write_trace_csv(out / "trace.csv", res.result.trace, req.mode);
  json report = to_json(res.report);
  report["run"] = to_json(c.run);
  report["case"] = case_spec_json(ec);
  report["seed"] = opt.seed;
  report["mode"] = std::string(to_string(req.mode));
  report["condition"] = std::string(to_string(req.condition));
  save_json(out / "report.json", report);
  std::cout << to_json(res.report).dump(2) << '\n';
  return 0;
}

int cmd_eval(const Options& opt) {
  const Config c = resolve(opt);
  if (opt.image.empty()) throw BadArguments("eval needs --image");
  const EditCase ec = load_case(c, opt);
  const GrayImage x1 = io::read_image(opt.image);
  GuidanceTrace trace;
  if (!opt.trace.empty()) trace = read_trace_csv(opt.trace);
  const MetricReport rep = evaluate_edit(ec, x1, trace, c.run);
  const json j = to_json(rep);
  save_json(fs::path(opt.out_dir) / "report.json", j);
  std::cout << j.dump(2) << '\n';
  return 0;
}

int write_ablation(const Options& opt, const std::string& stem, const std::vector<CaseRow>& rows) {
  const fs::path out = opt.out_dir;
  write_case_csv(out / (stem + "_cases.csv"), rows);
  write_summary_csv(out / (stem + "_summary.csv"), summarize(rows));
  return 0;
}

int cmd_ablate_domain(const Options& opt) {
  const Config c = resolve(opt);
  const auto cases = make_cases(c.cases, opt.seed, c.run.size, opt.threads);
  return write_ablation(opt, "domain", run_domain_ablation(cases, c.run, opt.seed, opt.threads));
}

int cmd_ablate_gpg(const Options& opt) {
  const Config c = resolve(opt);
  const auto cases = make_cases(c.cases, opt.seed, c.run.size, opt.threads);
  return write_ablation(opt, "gpg", run_gpg_ablation(cases, c.run, opt.seed, opt.threads));
}

int cmd_robustness(const Options& opt) {
  const Config c = resolve(opt);
  const auto cases = make_cases(c.cases, opt.seed, c.run.size, opt.threads);
  return write_ablation(opt, "robustness",
                        run_mask_robustness(cases, c.magnitudes, c.run, opt.seed, opt.threads));
}

int cmd_scale(const Options& opt) {
  Config c = resolve(opt);
  c.sweep.out_dir = opt.out_dir;
  const auto manifests = run_scaling_sweep(c.sweep, c.run, opt.seed, opt.threads);
  json j = json::array();
  for (const auto& m : manifests)
    j.push_back({{"ratio", m.ratio}, {"n_synth", m.n_synth}, {"manifest", m.manifest.lexically_relative(opt.out_dir).string()}});
  save_json(fs::path(opt.out_dir) / "sweep.json", {{"n_real", c.sweep.n_real}, {"seed", opt.seed}, {"sweeps", j}});
  return 0;
}

void print_error(const std::string& kind, const std::string& message) {
  std::cerr << json{{"error", kind}, {"message", message}}.dump() << '\n';
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Geometry-constrained image editing on synthetic vessel phantoms"};
  app.require_subcommand(1);
  Options opt;
  app.add_option("--config", opt.config, "JSON config or case spec")->option_text("<json>");
  app.add_option("--seed", opt.seed, "Master seed");
  app.add_option("--out-dir", opt.out_dir, "Output directory");
  app.add_option("--threads", opt.threads, "Worker threads for batch commands")->check(CLI::PositiveNumber);

  auto* phantom = app.add_subcommand("phantom", "Generate edit cases and a COCO manifest");
  phantom->add_option("--count", opt.count, "Number of cases");
  auto* edit = app.add_subcommand("edit", "Run one guided edit");
  auto* eval = app.add_subcommand("eval", "Score an edited image against a case");
  eval->add_option("--image", opt.image, "Edited image (.csv keeps full precision)")->required();
  eval->add_option("--trace", opt.trace, "trace.csv from `edit`");
  for (auto* sub : {edit}) {
    sub->add_option("--mode", opt.mode, "every_K | endpoint_only | none");
    sub->add_option("--condition", opt.condition, "edge | seg | comp | comp_no_preserve");
  }
  auto* domain = app.add_subcommand("ablate-domain", "Edge / Seg / Comp / C w/o P");
  auto* gpg = app.add_subcommand("ablate-gpg", "every_K / endpoint_only / no_boundary_term");
  auto* robust = app.add_subcommand("robustness", "Supervision perturbation sweep");
  robust->add_option("--magnitudes", opt.magnitudes, "Perturbation magnitudes in pixels")->delimiter(',');
  for (auto* sub : {domain, gpg, robust}) sub->add_option("--cases", opt.cases, "Number of phantom cases");
  auto* scale = app.add_subcommand("scale", "Synthetic-data scaling sweep");
  scale->add_option("--ratios", opt.ratios, "Synthetic-to-real ratios")->delimiter(',');
  scale->add_option("--n-real", opt.n_real, "Real-set size the ratios refer to");
  // Global flags are accepted after the subcommand too.
  for (auto* sub : app.get_subcommands({})) sub->fallthrough();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (phantom->parsed()) return cmd_phantom(opt);
    if (edit->parsed()) return cmd_edit(opt);
    if (eval->parsed()) return cmd_eval(opt);
    if (domain->parsed()) return cmd_ablate_domain(opt);
    if (gpg->parsed()) return cmd_ablate_gpg(opt);
    if (robust->parsed()) return cmd_robustness(opt);
    if (scale->parsed()) return cmd_scale(opt);
  } catch (const BadArguments& e) {
    print_error("BadArguments", e.what());
    return 2;
  } catch (const Error& e) {
    print_error(std::string(to_string(e.kind())), e.what());
    return 1;
  }
  return 2;
}
