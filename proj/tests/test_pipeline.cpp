#include "doctest.h"

#include <cstdlib>
#include <filesystem>
#include <string>

#include "gelwarp/io.hpp"
#include "gelwarp/pipeline.hpp"

using namespace gelwarp;

namespace {

fs::path prepare(const std::string& name) {
  auto dir = fs::temp_directory_path() / ("gelwarp_pipe_" + name);
  fs::remove_all(dir);
  SimSpec spec;
  spec.design = SimDesign::replicate_pairs;
  spec.lanes_per_gel = 4;
  spec.landmarks = 20;
  spec.bins = 400;
  simulate_command(spec, 2, dir / "sim");
  Json cfg = {{"traces", "sim/traces.csv"},
              {"manifest", "sim/manifest.json"},
              {"truth", "sim/truth.csv"},
              {"out", "run"},
              {"seed", 5},
              {"dewarp", {{"landmarks", 20}, {"t_nu", 6}, {"t_u", 4}, {"burn_in", 100}, {"saved", 60}, {"pilot_chains", 2}}},
              {"cluster", {{"nboot", 30}, {"posterior_draws", 10}}}};
  write_json(dir / "run.json", cfg);
  return dir;
}

std::string snapshot(const fs::path& run) {
  std::string all;
  std::vector<fs::path> files;
  for (const auto& e : fs::recursive_directory_iterator(run))
    if (e.is_regular_file()) files.push_back(e.path());
  std::sort(files.begin(), files.end());
  for (const auto& f : files) all += fs::relative(f, run).generic_string() + "\n" + read_text(f);
  return all;
}

int cli(const std::string& args) {
  const std::string cmd = std::string(GELWARP_CLI) + " " + args + " > /dev/null 2>&1";
  return std::system(cmd.c_str());
}

}  // namespace

TEST_CASE("pipeline runs are byte-identical and resume skips finished stages") {
  auto dir = prepare("repeat");
  pipeline_command(dir / "run.json", false);
  const auto first = snapshot(dir / "run");
  for (const char* f : {"peaks.json", "exact.csv", "posterior/warp.json", "posterior/zmap.json",
                        "clusters/dendrogram.nwk", "clusters/metrics.csv", "plotdata/fig3.csv"})
    CHECK(fs::exists(dir / "run" / f));
  pipeline_command(dir / "run.json", false, 3);
  CHECK(snapshot(dir / "run") == first);

  const auto stamp = fs::last_write_time(dir / "run" / "posterior" / "warp.json");
  pipeline_command(dir / "run.json", true);
  CHECK(fs::last_write_time(dir / "run" / "posterior" / "warp.json") == stamp);
  CHECK(snapshot(dir / "run") == first);

  // A damaged output forces its stage and everything after it to rerun.
  write_text(dir / "run" / "exact.csv", "gel_id,lane,bin,intensity\n");
  pipeline_command(dir / "run.json", true);
  CHECK(snapshot(dir / "run") == first);
  CHECK(fs::last_write_time(dir / "run" / "posterior" / "warp.json") == stamp);
}

TEST_CASE("config errors name the problem") {
  auto dir = prepare("config");
  auto cfg = read_json(dir / "run.json");
  cfg["clusterr"] = Json::object();
  write_json(dir / "bad.json", cfg);
  CHECK_THROWS_WITH_AS(pipeline_command(dir / "bad.json", false), doctest::Contains("clusterr"), Error);
  cfg = read_json(dir / "run.json");
  cfg["traces"] = "nowhere.csv";
  write_json(dir / "bad.json", cfg);
  CHECK_THROWS_WITH_AS(pipeline_command(dir / "bad.json", false), doctest::Contains("nowhere.csv"), Error);
}

TEST_CASE("command line reports bad input with a nonzero exit") {
  auto dir = prepare("cli");
  const auto sim = dir / "sim";
  CHECK(cli("detect --input " + (sim / "traces.csv").string() + " --manifest " + (sim / "manifest.json").string() +
            " --out " + (dir / "p.json").string()) == 0);
  write_text(dir / "broken.csv", "gel_id,lane,bin,intensity\nG1,1,1,0.5\nG1,1,3,oops\n");
  CHECK(cli("detect --input " + (dir / "broken.csv").string() + " --manifest " + (sim / "manifest.json").string() +
            " --out " + (dir / "q.json").string()) != 0);
  CHECK_FALSE(fs::exists(dir / "q.json"));
  CHECK(cli("detect --input " + (sim / "traces.csv").string() + " --manifest " + (sim / "manifest.json").string() +
            " --h 0 --out " + (dir / "q.json").string()) != 0);
  CHECK(cli("pipeline " + (dir / "missing.json").string()) != 0);
  CHECK(cli("frobnicate") != 0);
}
