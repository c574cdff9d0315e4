#pragma once

#include <filesystem>

#include "json.hpp"
#include "otbridge/harness.hpp"

namespace otbridge {

using json = nlohmann::json;

// Parsing is strict: unknown keys and wrong types raise InvalidArgument.
// Missing keys keep their defaults.
RunConfig run_config_from_json(const json& j);
json to_json(const RunConfig& cfg);

VesselPhantomSpec phantom_spec_from_json(const json& j);
json to_json(const VesselPhantomSpec& spec);

StenosisSpec stenosis_from_json(const json& j);
json to_json(const StenosisSpec& sten);

/// {"phantom": ..., "stenosis": ...} or {"sample": {"seed": s, "index": i}}.
EditCase edit_case_from_json(const json& j, int size);
json case_spec_json(const EditCase& ec);

/// PSNR is null when infinite, with psnr_infinite set.
json to_json(const MetricReport& rep);
json to_json(const CocoRecord& rec, int id, int image_id);

GuidanceTrace read_trace_csv(const std::filesystem::path& path);

json load_json(const std::filesystem::path& path);
void save_json(const std::filesystem::path& path, const json& j);

}  // namespace otbridge
