#include "gelwarp/io.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <set>
#include <sstream>

namespace gelwarp {

namespace {

using Setter = std::function<void(const Json&)>;

void apply_fields(const Json& value, const std::string& what, const std::map<std::string, Setter>& fields) {
  if (!value.is_object()) throw Error(what + " must be a JSON object");
  for (const auto& [key, v] : value.items()) {
    auto it = fields.find(key);
    if (it == fields.end()) throw Error(what + ": unknown key '" + key + "'");
    try {
      it->second(v);
    } catch (const nlohmann::json::exception& e) {
      throw Error(what + ": bad value for '" + key + "': " + e.what());
    }
  }
}

template <class T>
Setter set(T& target) {
  return [&target](const Json& v) { target = v.get<T>(); };
}

Setter set_prior(InvGammaPrior& prior) {
  return [&prior](const Json& v) {
    apply_fields(v, "prior", {{"shape", set(prior.shape)}, {"rate", set(prior.rate)}});
  };
}

Json prior_json(const InvGammaPrior& p) { return Json{{"shape", p.shape}, {"rate", p.rate}}; }

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  std::istringstream in(line);
  while (std::getline(in, field, ',')) out.push_back(field);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

std::string trim(std::string s) {
  while (!s.empty() && (s.back() == '\r' || s.back() == ' ')) s.pop_back();
  std::size_t i = 0;
  while (i < s.size() && s[i] == ' ') ++i;
  return s.substr(i);
}

template <class T>
bool parse_number(const std::string& text, T& out) {
  const auto* end = text.data() + text.size();
  auto [ptr, ec] = std::from_chars(text.data(), end, out);
  return ec == std::errc() && ptr == end;
}

}  // namespace

std::string format_double(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write " + path.string());
    out << text;
    if (!out) throw Error("failed writing " + path.string());
  }
  std::filesystem::rename(tmp, path);
}

Json read_json(const std::filesystem::path& path) {
  try {
    return Json::parse(read_text(path));
  } catch (const nlohmann::json::exception& e) {
    throw Error(path.string() + ": invalid JSON: " + e.what());
  }
}

void write_json(const std::filesystem::path& path, const Json& value) { write_text(path, value.dump(2) + "\n"); }

const GelManifest* Manifest::find(const std::string& gel_id) const {
  for (const auto& g : gels)
    if (g.gel_id == gel_id) return &g;
  return nullptr;
}

std::vector<MaskedInterval> Manifest::masks() const {
  std::vector<MaskedInterval> out;
  for (const auto& g : gels)
    for (const auto& [lo, hi] : g.masks) out.push_back({g.gel_id, lo, hi});
  return out;
}

Manifest read_manifest(const std::filesystem::path& path) {
  const Json doc = read_json(path);
  if (!doc.is_object()) throw Error(path.string() + ": manifest must map gel ids to objects");
  Manifest m;
  for (const auto& [id, entry] : doc.items()) {
    GelManifest g;
    g.gel_id = id;
    Json masks = Json::array();
    apply_fields(entry, "manifest entry for gel " + id,
                 {{"reference_lane",
                   [&](const Json& v) { g.reference_lane = v.is_null() ? 0 : v.get<int>(); }},
                  {"reference_kda", set(g.reference_kda)},
                  {"masks", set(masks)}});
    for (const auto& pair : masks) {
      if (!pair.is_array() || pair.size() != 2) throw Error("gel " + id + ": each mask must be [lo, hi]");
      g.masks.emplace_back(pair[0].get<double>(), pair[1].get<double>());
    }
    m.gels.push_back(std::move(g));
  }
  return m;
}

Json manifest_json(const Manifest& manifest) {
  Json doc = Json::object();
  for (const auto& g : manifest.gels) {
    Json entry;
    entry["reference_lane"] = g.reference_lane > 0 ? Json(g.reference_lane) : Json(nullptr);
    entry["reference_kda"] = g.reference_kda;
    if (!g.masks.empty()) {
      Json masks = Json::array();
      for (const auto& [lo, hi] : g.masks) masks.push_back({lo, hi});
      entry["masks"] = masks;
    }
    doc[g.gel_id] = entry;
  }
  return doc;
}

Manifest manifest_from_grid(const IntensityGrid& grid) {
  Manifest m;
  for (const auto& gel : grid.gels) {
    GelManifest g;
    g.gel_id = gel.gel_id;
    if (const Lane* ref = gel.reference_lane()) {
      g.reference_lane = ref->index;
      g.reference_kda = reference_weights();
    }
    m.gels.push_back(std::move(g));
  }
  return m;
}

IntensityGrid read_traces(const std::filesystem::path& path, const Manifest& manifest) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path.string());
  const std::string where = path.filename().string();
  std::string line;
  if (!std::getline(in, line)) throw Error(where + ": empty file");
  const auto header = split_csv(trim(line));
  if (header != std::vector<std::string>{"gel_id", "lane", "bin", "intensity"})
    throw Error(where + ": header must be gel_id,lane,bin,intensity");

  std::map<std::string, std::map<int, std::map<std::size_t, double>>> values;
  std::vector<std::string> gel_order;
  std::size_t row = 1;
  std::size_t bins = 0;
  while (std::getline(in, line)) {
    ++row;
    line = trim(line);
    if (line.empty()) continue;
    const auto f = split_csv(line);
    const std::string at = where + " row " + std::to_string(row) + ": ";
    if (f.size() != 4) throw Error(at + "expected 4 fields, found " + std::to_string(f.size()));
    int lane = 0;
    std::size_t bin = 0;
    double v = 0.0;
    if (!parse_number(f[1], lane) || lane < 1) throw Error(at + "bad lane '" + f[1] + "'");
    if (!parse_number(f[2], bin) || bin < 1) throw Error(at + "bad bin '" + f[2] + "'");
    if (!parse_number(f[3], v) || !std::isfinite(v))
      throw Error(at + "gel " + f[0] + " lane " + f[1] + " bin " + f[2] + ": bad intensity '" + f[3] + "'");
    if (!values.count(f[0])) gel_order.push_back(f[0]);
    auto& lane_values = values[f[0]][lane];
    if (!lane_values.emplace(bin, v).second)
      throw Error(at + "gel " + f[0] + " lane " + f[1] + ": duplicate bin " + f[2]);
    bins = std::max(bins, bin);
  }
  if (values.empty()) throw Error(where + ": no data rows");

  for (const auto& id : gel_order)
    if (!manifest.find(id)) throw Error(where + ": gel " + id + " is not listed in the manifest");
  IntensityGrid grid;
  grid.bins = bins;
  for (const auto& entry : manifest.gels) {
    auto git = values.find(entry.gel_id);
    if (git == values.end()) throw Error(where + ": manifest gel " + entry.gel_id + " has no traces");
    GelTrace gel;
    gel.gel_id = entry.gel_id;
    for (const auto& [lane, lane_values] : git->second) {
      for (std::size_t b = 1; b <= bins; ++b)
        if (!lane_values.count(b))
          throw Error(where + ": gel " + entry.gel_id + " lane " + std::to_string(lane) + ": missing bin " +
                      std::to_string(b) + " (expected bins 1.." + std::to_string(bins) + ")");
      Lane l;
      l.index = lane;
      l.is_reference = lane == entry.reference_lane;
      for (const auto& [b, v] : lane_values) l.intensity.push_back(v);
      gel.lanes.push_back(std::move(l));
    }
    if (entry.reference_lane > 0 && !gel.find_lane(entry.reference_lane))
      throw Error("gel " + entry.gel_id + ": reference lane " + std::to_string(entry.reference_lane) + " is missing");
    grid.gels.push_back(std::move(gel));
  }
  grid.validate();
  return grid;
}

std::string traces_csv(const IntensityGrid& grid) {
  std::string out = "gel_id,lane,bin,intensity\n";
  for (const auto& gel : grid.gels)
    for (const auto& lane : gel.lanes)
      for (std::size_t b = 0; b < lane.intensity.size(); ++b) {
        out += gel.gel_id;
        out += ',';
        out += std::to_string(lane.index);
        out += ',';
        out += std::to_string(b + 1);
        out += ',';
        out += format_double(lane.intensity[b]);
        out += '\n';
      }
  return out;
}

Json peaks_json(const PeakTable& peaks) {
  Json out = Json::array();
  for (const auto& p : peaks.entries)
    out.push_back({{"gel_id", p.gel_id},
                   {"lane", p.lane},
                   {"j", p.j},
                   {"bin", p.bin},
                   {"location", p.location},
                   {"intensity", p.intensity}});
  return out;
}

PeakTable peaks_from_json(const Json& value) {
  if (!value.is_array()) throw Error("peaks must be a JSON array");
  PeakTable table;
  for (const auto& e : value) {
    Peak p;
    apply_fields(e, "peak", {{"gel_id", set(p.gel_id)},
                             {"lane", set(p.lane)},
                             {"j", set(p.j)},
                             {"bin", set(p.bin)},
                             {"location", set(p.location)},
                             {"intensity", set(p.intensity)}});
    table.entries.push_back(std::move(p));
  }
  table.validate();
  return table;
}

Json refmaps_json(const std::map<std::string, PiecewiseLinearMap>& maps) {
  Json out = Json::object();
  for (const auto& [gel, map] : maps) out[gel] = {{"query", map.query_knots()}, {"template", map.template_knots()}};
  return out;
}

ModelConfig model_config_from_json(const Json& value) {
  ModelConfig c;
  apply_fields(value, "model config",
               {{"landmarks", set(c.landmarks)},
                {"t_nu", set(c.t_nu)},
                {"t_u", set(c.t_u)},
                {"window", set(c.window)},
                {"burn_in", set(c.burn_in)},
                {"saved", set(c.saved)},
                {"thin", set(c.thin)},
                {"noise_prior", set_prior(c.noise_prior)},
                {"horizontal_prior", set_prior(c.horizontal_prior)},
                {"vertical_prior", set_prior(c.vertical_prior)},
                {"tau_prior", set_prior(c.tau_prior)},
                {"lambda_step", set(c.lambda_step)},
                {"anneal_spacings", set(c.anneal_spacings)},
                {"pilot_chains", set(c.pilot_chains)},
                {"seed", set(c.seed)},
                {"update_z", set(c.update_z)},
                {"update_beta", set(c.update_beta)},
                {"update_hyper", set(c.update_hyper)}});
  c.validate();
  return c;
}

Json model_config_json(const ModelConfig& c) {
  return Json{{"landmarks", c.landmarks},
              {"t_nu", c.t_nu},
              {"t_u", c.t_u},
              {"window", c.window},
              {"burn_in", c.burn_in},
              {"saved", c.saved},
              {"thin", c.thin},
              {"noise_prior", prior_json(c.noise_prior)},
              {"horizontal_prior", prior_json(c.horizontal_prior)},
              {"vertical_prior", prior_json(c.vertical_prior)},
              {"tau_prior", prior_json(c.tau_prior)},
              {"lambda_step", c.lambda_step},
              {"anneal_spacings", c.anneal_spacings},
              {"pilot_chains", c.pilot_chains},
              {"seed", c.seed},
              {"update_z", c.update_z},
              {"update_beta", c.update_beta},
              {"update_hyper", c.update_hyper}};
}

SimSpec sim_spec_from_json(const Json& value) {
  SimSpec s;
  apply_fields(value, "simulation spec",
               {{"design", [&](const Json& v) { s.design = parse_sim_design(v.get<std::string>()); }},
                {"gels", set(s.gels)},
                {"lanes_per_gel", set(s.lanes_per_gel)},
                {"bins", set(s.bins)},
                {"landmarks", set(s.landmarks)},
                {"clusters", set(s.clusters)},
                {"hotspot_density", set(s.hotspot_density)},
                {"hotspot_rate", set(s.hotspot_rate)},
                {"background_rate", set(s.background_rate)},
                {"warp_amplitude", set(s.warp_amplitude)},
                {"location_noise", set(s.location_noise)},
                {"between_gel_shift", set(s.between_gel_shift)},
                {"band_width", set(s.band_width)},
                {"intensity_noise", set(s.intensity_noise)},
                {"exposure_min", set(s.exposure_min)},
                {"exposure_max", set(s.exposure_max)},
                {"shuffle_second_gel", set(s.shuffle_second_gel)},
                {"template_jitter", set(s.template_jitter)},
                {"pure_noise", set(s.pure_noise)}});
  s.validate();
  return s;
}

Json sim_spec_json(const SimSpec& s) {
  return Json{{"design", to_string(s.design)},
              {"gels", s.gels},
              {"lanes_per_gel", s.lanes_per_gel},
              {"bins", s.bins},
              {"landmarks", s.landmarks},
              {"clusters", s.clusters},
              {"hotspot_density", s.hotspot_density},
              {"hotspot_rate", s.hotspot_rate},
              {"background_rate", s.background_rate},
              {"warp_amplitude", s.warp_amplitude},
              {"location_noise", s.location_noise},
              {"between_gel_shift", s.between_gel_shift},
              {"band_width", s.band_width},
              {"intensity_noise", s.intensity_noise},
              {"exposure_min", s.exposure_min},
              {"exposure_max", s.exposure_max},
              {"shuffle_second_gel", s.shuffle_second_gel},
              {"template_jitter", s.template_jitter},
              {"pure_noise", s.pure_noise}};
}

std::map<std::pair<std::string, int>, int> read_truth_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path.string());
  std::string line;
  if (!std::getline(in, line) || split_csv(trim(line)) != std::vector<std::string>{"gel_id", "lane", "cluster"})
    throw Error(path.filename().string() + ": header must be gel_id,lane,cluster");
  std::map<std::pair<std::string, int>, int> out;
  std::size_t row = 1;
  while (std::getline(in, line)) {
    ++row;
    line = trim(line);
    if (line.empty()) continue;
    const auto f = split_csv(line);
    int lane = 0;
    int cluster = 0;
    if (f.size() != 3 || !parse_number(f[1], lane) || !parse_number(f[2], cluster))
      throw Error(path.filename().string() + " row " + std::to_string(row) + ": expected gel_id,lane,cluster");
    out[{f[0], lane}] = cluster;
  }
  return out;
}

}  // namespace gelwarp
