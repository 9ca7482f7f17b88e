#pragma once

/// \file
/// File-level stages behind the command-line tool. Each stage reads its
/// inputs from disk, validates them and writes its artifacts; the pipeline
/// chains them and can resume from content hashes.

#include <cstdint>
#include <filesystem>
#include <string>

#include "gelwarp/core.hpp"
#include "gelwarp/dewarp.hpp"
#include "gelwarp/io.hpp"
#include "gelwarp/peakdetect.hpp"
#include "gelwarp/simulate.hpp"

namespace gelwarp {

namespace fs = std::filesystem;

/// Writes traces.csv, manifest.json, truth.json and truth.csv.
void simulate_command(const SimSpec& spec, std::uint64_t seed, const fs::path& out_dir);

struct DetectOptions {
  PeakConfig peaks;
  StandardizeMethod method = StandardizeMethod::minmax;
  bool standardize = true;
};

/// Standardizes (optionally), drops masked peaks and writes peaks.json.
void detect_command(const fs::path& traces, const fs::path& manifest, const DetectOptions& options,
                    const fs::path& out_peaks, const fs::path& standardized_out = {}, unsigned threads = 1);

/// An empty `template_gel` selects the first gel of the manifest.
void refalign_command(const fs::path& traces, const fs::path& manifest, const fs::path& peaks,
                      const std::string& template_gel, std::size_t expected_count, const fs::path& out_traces,
                      const fs::path& map_out, unsigned threads = 1);

/// Fits the model to sample-lane peaks (reference lanes come from
/// `manifest`; without one every lane is used). With `new_gel_from` set to a
/// previous output directory, aligns a single new gel against its stored
/// lambda draws instead.
void dewarp_command(const fs::path& peaks, const fs::path& manifest, const ModelConfig& cfg, const fs::path& out_dir,
                    const fs::path& new_gel_from = {}, const NewGelConfig& new_gel = {});

/// `z_source` is "map" or "sample:k" with k the 1-based stored draw.
void align_command(const fs::path& traces, const fs::path& manifest, const fs::path& zmap,
                   const std::string& z_source, const fs::path& out_traces, unsigned threads = 1);

struct ClusterOptions {
  int nboot = 1000;
  std::uint64_t seed = 1;
  fs::path truth;      ///< truth.csv, optional
  fs::path posterior;  ///< dewarp output directory, optional
  fs::path aligned;    ///< reference-aligned traces, needed with `posterior`
  int posterior_draws = 100;
  fs::path raw;        ///< unaligned traces for comparison, optional
};

void cluster_command(const fs::path& traces, const fs::path& manifest, const ClusterOptions& options,
                     const fs::path& out_dir, unsigned threads = 1);

/// Collects figure series from a pipeline output directory.
void plotdata_command(const fs::path& run_dir, const fs::path& out_dir);

/// Config: {"traces", "manifest", "out", "truth", "seed", "threads",
/// "standardize", "detect", "refalign", "dewarp", "align", "cluster"}.
/// Relative paths are resolved against the config file's directory.
void pipeline_command(const fs::path& config, bool resume, unsigned threads_override = 0);

/// 64-bit FNV-1a hash of a byte string.
std::uint64_t fnv1a(const std::string& bytes);

}  // namespace gelwarp
