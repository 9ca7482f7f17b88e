#pragma once

/// \file
/// File formats: traces CSV, gel manifest, peak tables, reference maps and
/// the JSON configuration sections shared by the command-line stages.

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "json.hpp"

#include "gelwarp/core.hpp"
#include "gelwarp/dewarp.hpp"
#include "gelwarp/peakdetect.hpp"
#include "gelwarp/refalign.hpp"
#include "gelwarp/simulate.hpp"

namespace gelwarp {

using Json = nlohmann::ordered_json;

/// Shortest text that round-trips a double ("%.17g").
std::string format_double(double x);

std::string read_text(const std::filesystem::path& path);
/// Writes through a temporary file, creating parent directories.
void write_text(const std::filesystem::path& path, const std::string& text);
Json read_json(const std::filesystem::path& path);
void write_json(const std::filesystem::path& path, const Json& value);

struct GelManifest {
  std::string gel_id;
  int reference_lane = 0;  ///< 0 when the gel has no reference lane
  std::vector<double> reference_kda;
  std::vector<std::pair<double, double>> masks;  ///< excluded [lo, hi] location ranges
};

/// Gels in file order.
struct Manifest {
  std::vector<GelManifest> gels;

  const GelManifest* find(const std::string& gel_id) const;
  std::vector<MaskedInterval> masks() const;
};

/// `{"G1": {"reference_lane": 1, "reference_kda": [...], "masks": [[lo, hi]]}, ...}`
Manifest read_manifest(const std::filesystem::path& path);
Json manifest_json(const Manifest& manifest);
Manifest manifest_from_grid(const IntensityGrid& grid);

/// Long CSV `gel_id,lane,bin,intensity`. Every lane must carry bins 1..B
/// once; gels follow the manifest order and must all appear in it.
IntensityGrid read_traces(const std::filesystem::path& path, const Manifest& manifest);
std::string traces_csv(const IntensityGrid& grid);

Json peaks_json(const PeakTable& peaks);
PeakTable peaks_from_json(const Json& value);

Json refmaps_json(const std::map<std::string, PiecewiseLinearMap>& maps);

/// Missing keys keep their defaults; unknown keys are rejected.
ModelConfig model_config_from_json(const Json& value);
Json model_config_json(const ModelConfig& cfg);
SimSpec sim_spec_from_json(const Json& value);
Json sim_spec_json(const SimSpec& spec);

/// CSV `gel_id,lane,cluster`.
std::map<std::pair<std::string, int>, int> read_truth_csv(const std::filesystem::path& path);

}  // namespace gelwarp
