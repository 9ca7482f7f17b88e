#include "gelwarp/pipeline.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>
#include <set>
#include <sstream>

#include "gelwarp/cluster.hpp"
#include "gelwarp/exactalign.hpp"
#include "gelwarp/parallel.hpp"
#include "gelwarp/refalign.hpp"

namespace gelwarp {

namespace {

void log_line(const std::string& stage, const std::string& message) {
  std::clog << "[" << stage << "] " << message << "\n";
}

void log_warnings(const std::string& stage, const std::vector<std::string>& warnings) {
  for (const auto& w : warnings) log_line(stage, "warning: " + w);
}

std::string hex64(std::uint64_t v) {
  char buf[20];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

Manifest manifest_or_empty(const fs::path& path) { return path.empty() ? Manifest{} : read_manifest(path); }

std::set<std::pair<std::string, int>> reference_lanes(const Manifest& manifest) {
  std::set<std::pair<std::string, int>> out;
  for (const auto& g : manifest.gels)
    if (g.reference_lane > 0) out.insert({g.gel_id, g.reference_lane});
  return out;
}

Json standardizer_json(const Standardizer& s) { return Json{{"center", s.center()}, {"scale", s.scale()}}; }

Standardizer standardizer_from_json(const Json& v) {
  return Standardizer(v.at("center").get<double>(), v.at("scale").get<double>());
}

std::vector<double> row_major(const Eigen::MatrixXd& m) {
  std::vector<double> out;
  for (Eigen::Index r = 0; r < m.rows(); ++r)
    for (Eigen::Index c = 0; c < m.cols(); ++c) out.push_back(m(r, c));
  return out;
}

Json warp_json(const ModelData& data, const std::vector<Eigen::MatrixXd>& beta) {
  Json gels = Json::array();
  for (std::size_t g = 0; g < data.gels.size(); ++g) {
    const auto& gel = data.gels[g];
    const auto field = data.warp(g, beta[g]);
    Json curves = Json::array();
    for (const auto& lane : gel.lanes) {
      std::vector<double> s;
      for (double nu : data.nu) s.push_back(data.location.invert(field(nu, lane.u)));
      curves.push_back({{"lane", lane.lane}, {"S", s}});
    }
    gels.push_back({{"gel_id", gel.gel_id},
                    {"T_nu", gel.nu_basis.size()},
                    {"T_u", gel.u_basis.size()},
                    {"knots_nu", gel.nu_basis.knots()},
                    {"knots_u", gel.u_basis.knots()},
                    {"beta", row_major(beta[g])},
                    {"standardizer", {{"location", standardizer_json(data.location)},
                                      {"lane", standardizer_json(data.lane)}}},
                    {"curves", curves}});
  }
  return Json{{"landmarks", data.landmarks()},
              {"nu", data.grid.positions()},
              {"location_standardizer", standardizer_json(data.location)},
              {"lane_standardizer", standardizer_json(data.lane)},
              {"gels", gels}};
}

Json zmap_json(const ModelData& data, const PeakTable& peaks, const std::vector<std::vector<double>>& marginals,
               const std::vector<int>& z_map) {
  Json out = Json::array();
  std::size_t p = 0;
  for (const auto& gel : data.gels)
    for (const auto& lane : gel.lanes)
      for (std::size_t e : lane.entry) {
        const auto& peak = peaks.entries[e];
        Json marginal = Json::array();
        for (std::size_t l = 0; l < marginals[p].size(); ++l)
          if (marginals[p][l] > 0.0) marginal.push_back({static_cast<int>(l) + 1, marginals[p][l]});
        out.push_back({{"gel_id", peak.gel_id},
                       {"lane", peak.lane},
                       {"j", peak.j},
                       {"bin", peak.bin},
                       {"location", peak.location},
                       {"z", z_map[p]},
                       {"marginal", marginal}});
        ++p;
      }
  return Json{{"landmarks", data.landmarks()}, {"peaks", out}};
}

std::string signatures_csv(const ModelData& data, const std::vector<int>& z_map) {
  const auto y = signatures(lane_assignments(data, z_map), data.landmarks());
  std::string out = "gel_id,lane";
  for (int l = 1; l <= data.landmarks(); ++l) out += ",l" + std::to_string(l);
  out += "\n";
  std::size_t i = 0;
  for (const auto& gel : data.gels)
    for (const auto& lane : gel.lanes) {
      out += gel.gel_id + "," + std::to_string(lane.lane);
      for (auto v : y[i]) out += v ? ",1" : ",0";
      out += "\n";
      ++i;
    }
  return out;
}

Json landmarks_json(const ModelData& data, const PosteriorSummary& summary) {
  Json lanes = Json::array();
  std::size_t i = 0;
  for (const auto& gel : data.gels)
    for (const auto& lane : gel.lanes)
      lanes.push_back({{"gel_id", gel.gel_id}, {"lane", lane.lane}, {"prob", summary.landmark_prob[i++]}});
  return Json{{"landmarks", data.landmarks()},
              {"presence", summary.presence},
              {"lambda_star_mean", summary.lambda_star_mean},
              {"lanes", lanes}};
}

std::vector<std::vector<double>> read_number_rows(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path.string());
  std::string line;
  std::getline(in, line);
  std::vector<std::vector<double>> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<double> row;
    std::istringstream ss(line);
    std::string field;
    std::getline(ss, field, ',');
    while (std::getline(ss, field, ',')) row.push_back(std::stod(field));
    rows.push_back(std::move(row));
  }
  return rows;
}

struct ZmapFile {
  int landmarks = 0;
  PeakTable peaks;
  std::vector<int> z_map;
  std::vector<std::vector<int>> draws;  ///< loaded on demand
};

ZmapFile read_zmap(const fs::path& path, bool with_draws) {
  const Json doc = read_json(path);
  ZmapFile out;
  try {
    out.landmarks = doc.at("landmarks").get<int>();
    for (const auto& e : doc.at("peaks")) {
      Peak p;
      p.gel_id = e.at("gel_id").get<std::string>();
      p.lane = e.at("lane").get<int>();
      p.j = e.at("j").get<int>();
      p.bin = e.at("bin").get<std::size_t>();
      p.location = e.at("location").get<double>();
      out.peaks.entries.push_back(p);
      out.z_map.push_back(e.at("z").get<int>());
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(path.string() + ": malformed zmap: " + e.what());
  }
  out.peaks.validate();
  if (with_draws) {
    const auto draws = path.parent_path() / "zdraws.csv";
    for (const auto& row : read_number_rows(draws)) {
      if (row.size() != out.z_map.size()) throw Error(draws.string() + ": draw length does not match zmap");
      std::vector<int> z;
      for (double v : row) z.push_back(static_cast<int>(v));
      out.draws.push_back(std::move(z));
    }
    if (out.draws.empty()) throw Error(draws.string() + ": no stored draws");
  }
  return out;
}

std::string metric_or_na(bool ok, double v) { return ok ? format_double(v) : std::string("NA"); }

}  // namespace

std::uint64_t fnv1a(const std::string& bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

void simulate_command(const SimSpec& spec, std::uint64_t seed, const fs::path& out_dir) {
  const auto sim = simulate_gels(spec, seed);
  write_text(out_dir / "traces.csv", traces_csv(sim.grid));
  write_json(out_dir / "manifest.json", manifest_json(manifest_from_grid(sim.grid)));

  const auto& t = sim.truth;
  Json gels = Json::array();
  for (const auto& g : t.gels)
    gels.push_back({{"gel_id", g.gel_id},
                    {"warp_sign", g.warp_sign},
                    {"between", {{"query", g.between.query_knots()}, {"template", g.between.template_knots()}}},
                    {"references", g.references}});
  Json lanes = Json::array();
  std::string csv = "gel_id,lane,cluster\n";
  for (const auto& l : t.lanes) {
    lanes.push_back({{"gel_id", l.gel_id},
                     {"lane", l.lane},
                     {"cluster", l.cluster},
                     {"exposure", l.exposure},
                     {"landmarks", l.landmarks},
                     {"aligned", l.aligned},
                     {"observed", l.observed}});
    csv += l.gel_id + "," + std::to_string(l.lane) + "," + std::to_string(l.cluster) + "\n";
  }
  write_json(out_dir / "truth.json", Json{{"seed", seed},
                                          {"spec", sim_spec_json(spec)},
                                          {"landmarks", t.landmarks},
                                          {"hotspots", t.hotspots},
                                          {"gels", gels},
                                          {"lanes", lanes}});
  write_text(out_dir / "truth.csv", csv);
}

void detect_command(const fs::path& traces, const fs::path& manifest_path, const DetectOptions& options,
                    const fs::path& out_peaks, const fs::path& standardized_out, unsigned threads) {
  const auto manifest = read_manifest(manifest_path);
  IntensityGrid grid = read_traces(traces, manifest);
  if (options.standardize) {
    auto std_result = standardize_intensities(grid, options.method);
    log_warnings("detect", std_result.warnings);
    grid = std::move(std_result.grid);
  }
  if (!standardized_out.empty()) write_text(standardized_out, traces_csv(grid));
  options.peaks.validate(grid.bins);
  const auto masks = manifest.masks();
  auto peaks = apply_masks(detect_peaks(grid, options.peaks, threads), masks);
  peaks.validate();
  log_line("detect", std::to_string(peaks.entries.size()) + " peaks in " + std::to_string(grid.lane_count()) + " lanes");
  write_json(out_peaks, peaks_json(peaks));
}

void refalign_command(const fs::path& traces, const fs::path& manifest_path, const fs::path& peaks_path,
                      const std::string& template_gel, std::size_t expected_count, const fs::path& out_traces,
                      const fs::path& map_out, unsigned threads) {
  const auto manifest = read_manifest(manifest_path);
  const auto grid = read_traces(traces, manifest);
  const auto peaks = peaks_from_json(read_json(peaks_path));
  const std::string tmpl = template_gel.empty() ? manifest.gels.at(0).gel_id : template_gel;
  if (!grid.find_gel(tmpl)) throw Error("template gel " + tmpl + " not found");
  for (const auto& gel : grid.gels)
    if (!gel.reference_lane()) throw Error("gel " + gel.gel_id + ": missing reference lane");
  const auto result = reference_align(grid, peaks, tmpl, expected_count, threads);
  write_text(out_traces, traces_csv(result.grid));
  if (!map_out.empty()) write_json(map_out, refmaps_json(result.maps));
}

void dewarp_command(const fs::path& peaks_path, const fs::path& manifest_path, const ModelConfig& cfg_in,
                    const fs::path& out_dir, const fs::path& new_gel_from, const NewGelConfig& new_gel) {
  const auto manifest = manifest_or_empty(manifest_path);
  const auto refs = reference_lanes(manifest);
  const auto all = peaks_from_json(read_json(peaks_path));
  const auto peaks = filter_lanes(all, [&](const std::string& g, int lane) { return !refs.count({g, lane}); });
  if (peaks.entries.empty()) throw Error("no sample-lane peaks to model");

  if (!new_gel_from.empty()) {
    const Json warp = read_json(new_gel_from / "warp.json");
    ModelConfig cfg = cfg_in;
    cfg.landmarks = warp.at("landmarks").get<int>();
    const auto lambda = read_number_rows(new_gel_from / "lambda.csv");
    const auto result =
        align_new_gel(peaks, lambda, cfg, new_gel, standardizer_from_json(warp.at("lane_standardizer")));
    log_warnings("dewarp", result.data.warnings);
    write_json(out_dir / "warp.json", warp_json(result.data, {result.beta_mean}));
    write_json(out_dir / "zmap.json", zmap_json(result.data, peaks, result.z_marginals, result.z_map));
    write_text(out_dir / "signatures.csv", signatures_csv(result.data, result.z_map));
    return;
  }

  auto data = prepare_model(peaks, cfg_in);
  log_warnings("dewarp", data.warnings);
  log_line("dewarp", std::to_string(data.peak_count()) + " peaks, L=" + std::to_string(cfg_in.landmarks) + ", " +
                         std::to_string(cfg_in.burn_in) + " burn-in + " + std::to_string(cfg_in.saved) + " saved sweeps");
  const auto result = run_mcmc(std::move(data), cfg_in);
  const auto& d = result.data;
  const auto& s = result.summary;
  char rate[32];
  std::snprintf(rate, sizeof rate, "%.3f", result.lambda_acceptance);
  log_line("dewarp", std::string("lambda acceptance ") + rate);

  write_json(out_dir / "warp.json", warp_json(d, s.beta_mean));
  write_json(out_dir / "zmap.json", zmap_json(d, peaks, s.z_marginals, s.z_map));
  write_json(out_dir / "landmarks.json", landmarks_json(d, s));
  write_text(out_dir / "signatures.csv", signatures_csv(d, s.z_map));

  std::string chain = "draw,log_joint,noise_sd\n";
  std::string zdraws = "draw";
  for (std::size_t p = 0; p < d.peak_count(); ++p) zdraws += ",p" + std::to_string(p + 1);
  zdraws += "\n";
  std::string lambda = "draw";
  for (int l = 1; l <= d.landmarks(); ++l) lambda += ",l" + std::to_string(l);
  lambda += "\n";
  for (std::size_t k = 0; k < result.chain.size(); ++k) {
    const auto& st = result.chain[k];
    const auto draw = std::to_string(k + 1);
    chain += draw + "," + format_double(st.log_joint) + "," +
             format_double(std::sqrt(st.noise_var) * d.location.scale()) + "\n";
    zdraws += draw;
    for (int z : st.z) zdraws += "," + std::to_string(z);
    zdraws += "\n";
    lambda += draw;
    for (double v : st.lambda) lambda += "," + format_double(v);
    lambda += "\n";
  }
  write_text(out_dir / "chain.log", chain);
  write_text(out_dir / "zdraws.csv", zdraws);
  write_text(out_dir / "lambda.csv", lambda);
}

void align_command(const fs::path& traces, const fs::path& manifest_path, const fs::path& zmap_path,
                   const std::string& z_source, const fs::path& out_traces, unsigned threads) {
  const auto manifest = read_manifest(manifest_path);
  const auto grid = read_traces(traces, manifest);
  const bool sample = z_source.rfind("sample:", 0) == 0;
  if (!sample && z_source != "map") throw Error("z source must be 'map' or 'sample:k', got '" + z_source + "'");
  const auto zmap = read_zmap(zmap_path, sample);
  std::vector<int> z = zmap.z_map;
  if (sample) {
    std::size_t k = 0;
    try {
      k = std::stoul(z_source.substr(7));
    } catch (const std::exception&) {
      throw Error("bad draw index in '" + z_source + "'");
    }
    if (k < 1 || k > zmap.draws.size())
      throw Error("draw " + std::to_string(k) + " out of range 1.." + std::to_string(zmap.draws.size()));
    z = zmap.draws[k - 1];
  }
  const auto result = exact_align(grid, zmap.peaks, z, LandmarkGrid(zmap.landmarks), threads);
  log_warnings("align", result.warnings);
  write_text(out_traces, traces_csv(result.grid));
}

void cluster_command(const fs::path& traces, const fs::path& manifest_path, const ClusterOptions& options,
                     const fs::path& out_dir, unsigned threads) {
  const auto manifest = read_manifest(manifest_path);
  const auto grid = read_traces(traces, manifest);
  const auto lanes = lane_matrix(grid);
  const auto n_obs = static_cast<int>(lanes.rows.size());
  if (n_obs < 2) throw Error("clustering needs at least two sample lanes");
  const auto distance = correlation_distance(lanes.rows, lanes.labels);
  const auto tree = hclust_complete(distance);

  Partition truth;
  if (!options.truth.empty()) {
    const auto table = read_truth_csv(options.truth);
    for (const auto& gel : grid.gels)
      for (const auto& lane : gel.lanes) {
        if (lane.is_reference) continue;
        auto it = table.find({gel.gel_id, lane.index});
        if (it == table.end())
          throw Error("truth has no label for gel " + gel.gel_id + " lane " + std::to_string(lane.index));
        truth.push_back(it->second);
      }
  }
  const Partition* truth_ptr = truth.empty() ? nullptr : &truth;

  std::vector<ClusterMetrics> posterior;
  if (!options.posterior.empty()) {
    if (options.aligned.empty()) throw Error("posterior clustering needs the reference-aligned traces");
    const auto aligned = read_traces(options.aligned, manifest);
    const auto zmap = read_zmap(options.posterior / "zmap.json", true);
    const auto K = zmap.draws.size();
    const auto m = std::min<std::size_t>(K, static_cast<std::size_t>(std::max(1, options.posterior_draws)));
    std::vector<Eigen::MatrixXd> distances(m);
    const LandmarkGrid landmarks(zmap.landmarks);
    parallel_for(m, threads, [&](std::size_t i) {
      const auto& z = zmap.draws[i * K / m];
      const auto exact = exact_align(aligned, zmap.peaks, z, landmarks);
      const auto rows = lane_matrix(exact.grid);
      distances[i] = correlation_distance(rows.rows, rows.labels);
    });
    posterior = posterior_clustering_summary(distances, truth_ptr, threads);
  }

  std::vector<double> raw_ari;
  std::vector<double> raw_sil;
  if (!options.raw.empty()) {
    const auto raw = lane_matrix(read_traces(options.raw, manifest));
    const auto raw_d = correlation_distance(raw.rows, raw.labels);
    const auto raw_tree = hclust_complete(raw_d);
    for (int n = 2; n <= n_obs; ++n) {
      const auto p = raw_tree.cut(n);
      raw_sil.push_back(average_silhouette(raw_d, p));
      raw_ari.push_back(truth_ptr ? adjusted_rand(p, truth) : 0.0);
    }
  }

  const auto confidence = bootstrap_confidence(lanes.rows, tree, options.nboot, options.seed, threads);
  write_text(out_dir / "dendrogram.nwk", tree.newick(lanes.labels, &confidence) + "\n");
  Json conf = Json::array();
  const auto sets = tree.leaf_sets();
  for (std::size_t k = 0; k < sets.size(); ++k) {
    std::vector<std::string> names;
    for (int i : sets[k]) names.push_back(lanes.labels[static_cast<std::size_t>(i)]);
    conf.push_back({{"leaves", names},
                    {"height", tree.merges[k].height},
                    {"confidence", confidence[k]},
                    {"strong", confidence[k] > 0.95}});
  }
  write_json(out_dir / "confidence.json", Json{{"replicates", options.nboot}, {"subtrees", conf}});

  std::string metrics = "n,aRI_mean,aRI_lo,aRI_hi,silhouette\n";
  std::string fig3 = "n,ari_mean,ari_lo,ari_hi,ari_input,silhouette_input,ari_raw,silhouette_raw\n";
  for (int n = 2; n <= n_obs; ++n) {
    const auto i = static_cast<std::size_t>(n - 2);
    const auto p = tree.cut(n);
    const double sil = average_silhouette(distance, p);
    const double ari = truth_ptr ? adjusted_rand(p, truth) : 0.0;
    double mean = ari;
    double lo = ari;
    double hi = ari;
    if (!posterior.empty()) {
      mean = posterior[i].ari_mean;
      lo = posterior[i].ari_lo;
      hi = posterior[i].ari_hi;
    }
    const bool t = truth_ptr != nullptr;
    metrics += std::to_string(n) + "," + metric_or_na(t, mean) + "," + metric_or_na(t, lo) + "," +
               metric_or_na(t, hi) + "," + format_double(sil) + "\n";
    fig3 += std::to_string(n) + "," + metric_or_na(t, mean) + "," + metric_or_na(t, lo) + "," + metric_or_na(t, hi) +
            "," + metric_or_na(t, ari) + "," + format_double(sil) + "," + metric_or_na(t && !raw_ari.empty(), raw_ari.empty() ? 0.0 : raw_ari[i]) +
            "," + metric_or_na(!raw_sil.empty(), raw_sil.empty() ? 0.0 : raw_sil[i]) + "\n";
  }
  write_text(out_dir / "metrics.csv", metrics);
  write_text(out_dir / "plotdata" / "fig3.csv", fig3);

  std::string nodes = "node,left,right,height,confidence,size\n";
  for (std::size_t k = 0; k < tree.merges.size(); ++k) {
    const auto& mg = tree.merges[k];
    nodes += std::to_string(n_obs + static_cast<int>(k)) + "," + std::to_string(mg.left) + "," +
             std::to_string(mg.right) + "," + format_double(mg.height) + "," + format_double(confidence[k]) + "," +
             std::to_string(sets[k].size()) + "\n";
  }
  std::string leaves = "node,label\n";
  for (int i = 0; i < n_obs; ++i) leaves += std::to_string(i) + "," + lanes.labels[static_cast<std::size_t>(i)] + "\n";
  write_text(out_dir / "plotdata" / "fig5_nodes.csv", nodes);
  write_text(out_dir / "plotdata" / "fig5_leaves.csv", leaves);
}

void plotdata_command(const fs::path& run_dir, const fs::path& out_dir) {
  const auto posterior = run_dir / "posterior";
  const Json warp = read_json(posterior / "warp.json");
  const auto zmap = read_zmap(posterior / "zmap.json", false);
  const Json landmarks = read_json(posterior / "landmarks.json");
  const auto nu = warp.at("nu").get<std::vector<double>>();

  std::string peaks = "gel_id,lane,j,location,z,landmark_position\n";
  for (std::size_t p = 0; p < zmap.peaks.entries.size(); ++p) {
    const auto& e = zmap.peaks.entries[p];
    peaks += e.gel_id + "," + std::to_string(e.lane) + "," + std::to_string(e.j) + "," + format_double(e.location) +
             "," + std::to_string(zmap.z_map[p]) + "," + format_double(nu.at(static_cast<std::size_t>(zmap.z_map[p]))) +
             "\n";
  }
  std::string curves = "gel_id,lane,l,nu,S\n";
  for (const auto& gel : warp.at("gels"))
    for (const auto& c : gel.at("curves")) {
      const auto s = c.at("S").get<std::vector<double>>();
      for (std::size_t l = 0; l < s.size(); ++l)
        curves += gel.at("gel_id").get<std::string>() + "," + std::to_string(c.at("lane").get<int>()) + "," +
                  std::to_string(l) + "," + format_double(nu[l]) + "," + format_double(s[l]) + "\n";
    }
  std::string probs = "gel_id,lane,l,prob\n";
  for (const auto& lane : landmarks.at("lanes")) {
    const auto p = lane.at("prob").get<std::vector<double>>();
    for (std::size_t l = 0; l < p.size(); ++l)
      probs += lane.at("gel_id").get<std::string>() + "," + std::to_string(lane.at("lane").get<int>()) + "," +
               std::to_string(l + 1) + "," + format_double(p[l]) + "\n";
  }
  std::string presence = "l,presence,lambda_star_mean\n";
  const auto pr = landmarks.at("presence").get<std::vector<double>>();
  const auto ls = landmarks.at("lambda_star_mean").get<std::vector<double>>();
  for (std::size_t l = 0; l < pr.size(); ++l)
    presence += std::to_string(l + 1) + "," + format_double(pr[l]) + "," + format_double(ls[l]) + "\n";
  write_text(out_dir / "fig4_peaks.csv", peaks);
  write_text(out_dir / "fig4_warp.csv", curves);
  write_text(out_dir / "fig4_landmarks.csv", probs);
  write_text(out_dir / "fig4_presence.csv", presence);
  for (const char* name : {"fig3.csv", "fig5_nodes.csv", "fig5_leaves.csv"}) {
    const auto src = run_dir / "clusters" / "plotdata" / name;
    if (fs::exists(src)) write_text(out_dir / name, read_text(src));
  }
}

void pipeline_command(const fs::path& config_path, bool resume, unsigned threads_override) {
  const Json cfg = read_json(config_path);
  const auto base = config_path.has_parent_path() ? config_path.parent_path() : fs::path(".");
  static const std::set<std::string> known{"traces", "manifest", "out",    "truth",   "seed",   "threads",
                                           "standardize", "detect", "refalign", "dewarp", "align", "cluster"};
  for (const auto& [key, value] : cfg.items())
    if (!known.count(key)) throw Error("pipeline config: unknown key '" + key + "'");
  auto path_of = [&](const char* key) -> fs::path {
    if (!cfg.contains(key) || cfg[key].is_null()) return {};
    fs::path p = cfg[key].get<std::string>();
    return p.is_absolute() ? p : base / p;
  };
  const auto traces = path_of("traces");
  const auto manifest = path_of("manifest");
  const auto out = path_of("out");
  const auto truth = path_of("truth");
  if (traces.empty() || manifest.empty() || out.empty())
    throw Error("pipeline config needs 'traces', 'manifest' and 'out'");
  for (const auto& p : {traces, manifest, truth})
    if (!p.empty() && !fs::exists(p)) throw Error("pipeline config: input " + p.string() + " does not exist");
  const auto seed = cfg.value("seed", std::uint64_t{1});
  const unsigned threads = threads_override ? threads_override : cfg.value("threads", 1u);
  const Json section_detect = cfg.value("detect", Json::object());
  const Json section_refalign = cfg.value("refalign", Json::object());
  const Json section_align = cfg.value("align", Json::object());
  const Json section_cluster = cfg.value("cluster", Json::object());
  Json section_dewarp = cfg.value("dewarp", Json::object());
  if (!section_dewarp.contains("seed")) section_dewarp["seed"] = seed;
  auto check_keys = [](const Json& section, const char* name, std::set<std::string> allowed) {
    if (!section.is_object()) throw Error(std::string("pipeline config: '") + name + "' must be an object");
    for (const auto& [key, value] : section.items())
      if (!allowed.count(key)) throw Error(std::string("pipeline config: unknown key '") + name + "." + key + "'");
  };
  check_keys(section_detect, "detect", {"h", "c0"});
  check_keys(section_refalign, "refalign", {"template", "expected_count"});
  check_keys(section_align, "align", {"z_source"});
  check_keys(section_cluster, "cluster", {"nboot", "posterior_draws"});

  DetectOptions detect;
  detect.method = parse_standardize_method(cfg.value("standardize", std::string("minmax")));
  detect.peaks.h = section_detect.value("h", 10);
  detect.peaks.c0 = section_detect.value("c0", 0.05);
  ModelConfig model = model_config_from_json(section_dewarp);
  model.threads = threads;
  const auto template_gel = section_refalign.value("template", std::string());
  const auto expected = section_refalign.value("expected_count", std::size_t{7});
  const auto z_source = section_align.value("z_source", std::string("map"));
  ClusterOptions cluster;
  cluster.nboot = section_cluster.value("nboot", 1000);
  cluster.posterior_draws = section_cluster.value("posterior_draws", 100);
  cluster.seed = seed;
  cluster.truth = truth;

  const auto state_path = out / "stages.json";
  Json state = resume && fs::exists(state_path) ? read_json(state_path) : Json::object();
  auto file_hash = [](const fs::path& p) { return hex64(fnv1a(read_text(p))); };

  struct Stage {
    std::string name;
    Json settings;
    std::vector<fs::path> inputs;
    std::vector<fs::path> outputs;
    std::function<void()> run;
  };
  const auto posterior = out / "posterior";
  const std::vector<fs::path> posterior_files{posterior / "warp.json",      posterior / "zmap.json",
                                              posterior / "landmarks.json", posterior / "signatures.csv",
                                              posterior / "chain.log",      posterior / "zdraws.csv",
                                              posterior / "lambda.csv"};
  std::vector<Stage> stages;
  stages.push_back({"detect",
                    {{"standardize", cfg.value("standardize", std::string("minmax"))}, {"detect", section_detect}},
                    {traces, manifest},
                    {out / "standardized.csv", out / "peaks_raw.json"},
                    [&] {
                      detect_command(traces, manifest, detect, out / "peaks_raw.json", out / "standardized.csv",
                                     threads);
                    }});
  stages.push_back({"refalign",
                    {{"refalign", section_refalign}, {"detect", section_detect}},
                    {out / "standardized.csv", out / "peaks_raw.json", manifest},
                    {out / "aligned.csv", out / "refmaps.json", out / "peaks.json"},
                    [&] {
                      refalign_command(out / "standardized.csv", manifest, out / "peaks_raw.json", template_gel,
                                       expected, out / "aligned.csv", out / "refmaps.json", threads);
                      DetectOptions again = detect;
                      again.standardize = false;
                      detect_command(out / "aligned.csv", manifest, again, out / "peaks.json", {}, threads);
                    }});
  stages.push_back({"dewarp",
                    {{"dewarp", model_config_json(model)}},
                    {out / "peaks.json", manifest},
                    posterior_files,
                    [&] { dewarp_command(out / "peaks.json", manifest, model, posterior); }});
  stages.push_back({"align",
                    {{"z_source", z_source}},
                    {out / "aligned.csv", manifest, posterior / "zmap.json", posterior / "zdraws.csv"},
                    {out / "exact.csv"},
                    [&] { align_command(out / "aligned.csv", manifest, posterior / "zmap.json", z_source, out / "exact.csv", threads); }});
  std::vector<fs::path> cluster_inputs{out / "exact.csv", out / "aligned.csv", out / "standardized.csv", manifest,
                                       posterior / "zmap.json", posterior / "zdraws.csv"};
  if (!truth.empty()) cluster_inputs.push_back(truth);
  const auto clusters = out / "clusters";
  stages.push_back({"cluster",
                    {{"cluster", section_cluster}, {"seed", seed}},
                    cluster_inputs,
                    {clusters / "dendrogram.nwk", clusters / "confidence.json", clusters / "metrics.csv",
                     clusters / "plotdata" / "fig3.csv", clusters / "plotdata" / "fig5_nodes.csv",
                     clusters / "plotdata" / "fig5_leaves.csv"},
                    [&] {
                      ClusterOptions c = cluster;
                      c.posterior = posterior;
                      c.aligned = out / "aligned.csv";
                      c.raw = out / "standardized.csv";
                      cluster_command(out / "exact.csv", manifest, c, clusters, threads);
                    }});
  stages.push_back({"plotdata",
                    Json::object(),
                    {posterior / "warp.json", posterior / "zmap.json", posterior / "landmarks.json",
                     clusters / "plotdata" / "fig3.csv"},
                    {out / "plotdata" / "fig4_peaks.csv", out / "plotdata" / "fig4_warp.csv",
                     out / "plotdata" / "fig4_landmarks.csv", out / "plotdata" / "fig4_presence.csv",
                     out / "plotdata" / "fig3.csv"},
                    [&] { plotdata_command(out, out / "plotdata"); }});

  for (auto& stage : stages) {
    try {
      std::string key = stage.name + "\n" + stage.settings.dump() + "\n";
      for (const auto& p : stage.inputs) key += p.filename().string() + ":" + file_hash(p) + "\n";
      const auto key_hash = hex64(fnv1a(key));
      bool done = false;
      if (resume && state.contains(stage.name) && state[stage.name].value("key", std::string()) == key_hash) {
        done = true;
        const auto& outputs = state[stage.name]["outputs"];
        for (const auto& p : stage.outputs) {
          const auto rel = fs::relative(p, out).generic_string();
          if (!fs::exists(p) || !outputs.contains(rel) || outputs[rel].get<std::string>() != file_hash(p)) done = false;
        }
      }
      if (done) {
        log_line(stage.name, "up to date, skipped");
        continue;
      }
      log_line(stage.name, "running");
      stage.run();
      Json outputs = Json::object();
      for (const auto& p : stage.outputs) {
        if (!fs::exists(p)) throw Error("expected output " + p.string() + " was not written");
        outputs[fs::relative(p, out).generic_string()] = file_hash(p);
      }
      state[stage.name] = {{"key", key_hash}, {"outputs", outputs}};
      write_json(state_path, state);
    } catch (const std::exception& e) {
      throw Error("stage " + stage.name + ": " + e.what());
    }
  }
}

}  // namespace gelwarp
