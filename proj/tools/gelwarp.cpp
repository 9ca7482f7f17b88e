#include <iostream>
#include <string>

#include "CLI11.hpp"

#include "gelwarp/io.hpp"
#include "gelwarp/pipeline.hpp"

using namespace gelwarp;

int main(int argc, char** argv) {
  CLI::App app{"gelwarp: peak detection, reference alignment, Bayesian dewarping and clustering of gel lanes"};
  app.require_subcommand(1);
  unsigned threads = 1;
  app.add_option("--threads", threads, "Maximum worker threads")->check(CLI::PositiveNumber);

  std::string spec_path, out, input, manifest, peaks, config, zmap, truth, templ, map_out, z_source = "map",
                                                                                       method = "minmax", new_gel;
  std::uint64_t seed = 7;

  auto* sim = app.add_subcommand("simulate", "Write a synthetic batch with known truth");
  sim->add_option("--spec", spec_path, "Simulation spec JSON (defaults when omitted)");
  sim->add_option("--seed", seed, "Random seed");
  sim->add_option("--out", out, "Output directory")->required();

  DetectOptions detect;
  std::string standardized;
  bool no_standardize = false;
  auto* det = app.add_subcommand("detect", "Standardize lanes and detect peaks");
  det->set_help_flag("--help", "Print this help message and exit");
  det->add_option("--input", input, "Traces CSV")->required();
  det->add_option("--manifest", manifest, "Gel manifest JSON")->required();
  det->add_option("--h", detect.peaks.h, "Neighbour offset in bins");
  det->add_option("--c0", detect.peaks.c0, "Minimum peak elevation");
  det->add_option("--standardize", method, "minmax or quantile");
  det->add_flag("--no-standardize", no_standardize, "Use intensities as given");
  det->add_option("--standardized-out", standardized, "Also write the standardized traces");
  det->add_option("--out", out, "Output peaks JSON")->required();

  std::size_t expected = 7;
  auto* ref = app.add_subcommand("refalign", "Align gels on their reference lanes");
  ref->add_option("--input", input, "Traces CSV")->required();
  ref->add_option("--manifest", manifest, "Gel manifest JSON")->required();
  ref->add_option("--peaks", peaks, "Peaks JSON")->required();
  ref->add_option("--template", templ, "Template gel (first manifest gel by default)");
  ref->add_option("--expected", expected, "Reference bands per lane");
  ref->add_option("--out", out, "Aligned traces CSV")->required();
  ref->add_option("--map-out", map_out, "Piecewise-linear maps JSON");

  NewGelConfig new_cfg;
  auto* dew = app.add_subcommand("dewarp", "Fit the dewarping model by MCMC");
  dew->add_option("--peaks", peaks, "Peaks JSON")->required();
  dew->add_option("--manifest", manifest, "Manifest marking reference lanes to exclude");
  dew->add_option("--config", config, "Model config JSON");
  dew->add_option("--new-gel", new_gel, "Align one new gel against this earlier output directory");
  dew->add_option("--lambda-budget", new_cfg.lambda_budget, "Stored lambda draws used for a new gel");
  dew->add_option("--out", out, "Output directory")->required();

  auto* ali = app.add_subcommand("align", "Exact peak-to-landmark alignment");
  ali->add_option("--input", input, "Reference-aligned traces CSV")->required();
  ali->add_option("--manifest", manifest, "Gel manifest JSON")->required();
  ali->add_option("--zmap", zmap, "zmap.json from dewarp")->required();
  ali->add_option("--z-source", z_source, "map or sample:k");
  ali->add_option("--out", out, "Output traces CSV")->required();

  ClusterOptions cl;
  std::string posterior, aligned, raw;
  auto* clu = app.add_subcommand("cluster", "Complete-linkage clustering with bootstrap confidence");
  clu->add_option("--input", input, "Aligned traces CSV")->required();
  clu->add_option("--manifest", manifest, "Gel manifest JSON")->required();
  clu->add_option("--nboot", cl.nboot, "Bootstrap replicates")->check(CLI::PositiveNumber);
  clu->add_option("--seed", cl.seed, "Bootstrap seed");
  clu->add_option("--truth", truth, "True partition CSV (gel_id,lane,cluster)");
  clu->add_option("--posterior", posterior, "Dewarp output directory for posterior aRI bands");
  clu->add_option("--aligned", aligned, "Reference-aligned traces used with --posterior");
  clu->add_option("--draws", cl.posterior_draws, "Stored draws used with --posterior");
  clu->add_option("--raw", raw, "Unaligned traces for comparison");
  clu->add_option("--out", out, "Output directory")->required();

  std::string run_dir;
  auto* plot = app.add_subcommand("plotdata", "Collect figure series from a pipeline run");
  plot->add_option("--run", run_dir, "Pipeline output directory")->required();
  plot->add_option("--out", out, "Output directory (default <run>/plotdata)");

  bool resume = false;
  auto* pipe = app.add_subcommand("pipeline", "Run every stage from one config file");
  pipe->add_option("config", config, "Pipeline config JSON")->required();
  pipe->add_flag("--resume", resume, "Skip stages whose inputs and outputs are unchanged");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*sim) {
      SimSpec spec = spec_path.empty() ? SimSpec{} : sim_spec_from_json(read_json(spec_path));
      simulate_command(spec, seed, out);
    } else if (*det) {
      detect.method = parse_standardize_method(method);
      detect.standardize = !no_standardize;
      detect_command(input, manifest, detect, out, standardized, threads);
    } else if (*ref) {
      refalign_command(input, manifest, peaks, templ, expected, out, map_out, threads);
    } else if (*dew) {
      ModelConfig cfg = config.empty() ? ModelConfig{} : model_config_from_json(read_json(config));
      cfg.threads = threads;
      dewarp_command(peaks, manifest, cfg, out, new_gel, new_cfg);
    } else if (*ali) {
      align_command(input, manifest, zmap, z_source, out, threads);
    } else if (*clu) {
      cl.truth = truth;
      cl.posterior = posterior;
      cl.aligned = aligned;
      cl.raw = raw;
      cluster_command(input, manifest, cl, out, threads);
    } else if (*plot) {
      plotdata_command(run_dir, out.empty() ? fs::path(run_dir) / "plotdata" : fs::path(out));
    } else if (*pipe) {
      pipeline_command(config, resume, app.count("--threads") ? threads : 0);
    }
  } catch (const std::exception& e) {
    std::cerr << "gelwarp: error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
