#include "gelwarp/cluster.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <map>
#include <numeric>
#include <set>

#include "gelwarp/parallel.hpp"

namespace gelwarp {

namespace {

double choose2(double n) { return n * (n - 1.0) / 2.0; }

std::string format_number(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.10g", x);
  return buf;
}

Partition relabel(const Partition& p) {
  std::map<int, int> seen;
  Partition out;
  out.reserve(p.size());
  for (int c : p) out.push_back(seen.emplace(c, static_cast<int>(seen.size()) + 1).first->second);
  return out;
}

}  // namespace

LaneMatrix lane_matrix(const IntensityGrid& grid) {
  LaneMatrix out;
  for (const auto& gel : grid.gels)
    for (const auto& lane : gel.lanes) {
      if (lane.is_reference) continue;
      out.labels.push_back(gel.gel_id + "_" + std::to_string(lane.index));
      out.rows.push_back(lane.intensity);
    }
  return out;
}

Eigen::MatrixXd correlation_distance(const std::vector<std::vector<double>>& rows,
                                     const std::vector<std::string>& labels, bool strict) {
  const auto n = rows.size();
  if (n < 2) throw Error("distance matrix needs at least two lanes");
  const auto m = rows.front().size();
  Eigen::MatrixXd centered(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(m));
  std::vector<bool> constant(n, false);
  for (std::size_t i = 0; i < n; ++i) {
    if (rows[i].size() != m) throw Error("lane " + labels.at(i) + " has a different length");
    const Eigen::Map<const Eigen::VectorXd> row(rows[i].data(), static_cast<Eigen::Index>(m));
    Eigen::VectorXd c = row.array() - row.mean();
    const double norm = c.norm();
    if (!(norm > 0.0)) {
      if (strict) throw Error("lane " + labels.at(i) + " is constant; correlation distance is undefined");
      constant[i] = true;
      centered.row(static_cast<Eigen::Index>(i)).setZero();
      continue;
    }
    centered.row(static_cast<Eigen::Index>(i)) = c / norm;
  }
  Eigen::MatrixXd d = Eigen::MatrixXd::Ones(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n)) -
                      centered * centered.transpose();
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t k = 0; k < n; ++k) {
      const auto a = static_cast<Eigen::Index>(i);
      const auto b = static_cast<Eigen::Index>(k);
      if (i == k)
        d(a, b) = 0.0;
      else if (constant[i] || constant[k])
        d(a, b) = 1.0;
      else
        d(a, b) = std::clamp(d(a, b), 0.0, 2.0);
    }
  return (d + d.transpose()) / 2.0;
}

Dendrogram hclust_complete(const Eigen::MatrixXd& distance) {
  const auto n = static_cast<int>(distance.rows());
  if (n < 1 || distance.cols() != n) throw Error("distance matrix must be square and nonempty");
  Eigen::MatrixXd d = distance;
  std::vector<bool> active(static_cast<std::size_t>(n), true);
  std::vector<int> node(static_cast<std::size_t>(n));
  std::iota(node.begin(), node.end(), 0);
  Dendrogram tree;
  tree.leaves = n;
  for (int step = 0; step + 1 < n; ++step) {
    int best_a = -1;
    int best_b = -1;
    double best = std::numeric_limits<double>::infinity();
    for (int a = 0; a < n; ++a) {
      if (!active[static_cast<std::size_t>(a)]) continue;
      for (int b = a + 1; b < n; ++b) {
        if (!active[static_cast<std::size_t>(b)]) continue;
        if (d(a, b) < best || best_a < 0) {
          best = d(a, b);
          best_a = a;
          best_b = b;
        }
      }
    }
    tree.merges.push_back({node[static_cast<std::size_t>(best_a)], node[static_cast<std::size_t>(best_b)], best});
    for (int k = 0; k < n; ++k) {
      const double v = std::max(d(best_a, k), d(best_b, k));
      d(best_a, k) = v;
      d(k, best_a) = v;
    }
    active[static_cast<std::size_t>(best_b)] = false;
    node[static_cast<std::size_t>(best_a)] = n + step;
  }
  return tree;
}

std::vector<std::vector<int>> Dendrogram::leaf_sets() const {
  std::vector<std::vector<int>> sets;
  sets.reserve(merges.size());
  auto members = [&](int id) -> std::vector<int> {
    if (id < leaves) return {id};
    return sets[static_cast<std::size_t>(id - leaves)];
  };
  for (const auto& m : merges) {
    auto s = members(m.left);
    auto r = members(m.right);
    s.insert(s.end(), r.begin(), r.end());
    std::sort(s.begin(), s.end());
    sets.push_back(std::move(s));
  }
  return sets;
}

Partition Dendrogram::cut(int n) const {
  if (n < 1 || n > leaves) throw Error("cannot cut a dendrogram of " + std::to_string(leaves) + " leaves into " +
                                       std::to_string(n) + " clusters");
  std::vector<int> parent(static_cast<std::size_t>(leaves) + merges.size());
  std::iota(parent.begin(), parent.end(), 0);
  auto find = [&](int x) {
    while (parent[static_cast<std::size_t>(x)] != x) x = parent[static_cast<std::size_t>(x)];
    return x;
  };
  const auto keep = static_cast<std::size_t>(leaves - n);
  for (std::size_t k = 0; k < keep; ++k) {
    const int id = leaves + static_cast<int>(k);
    parent[static_cast<std::size_t>(find(merges[k].left))] = id;
    parent[static_cast<std::size_t>(find(merges[k].right))] = id;
  }
  Partition roots;
  for (int i = 0; i < leaves; ++i) roots.push_back(find(i));
  return relabel(roots);
}

std::string Dendrogram::newick(const std::vector<std::string>& labels, const std::vector<double>* confidence) const {
  if (static_cast<int>(labels.size()) != leaves) throw Error("newick needs one label per leaf");
  auto height = [&](int id) { return id < leaves ? 0.0 : merges[static_cast<std::size_t>(id - leaves)].height; };
  auto clean = [](std::string s) {
    for (char& c : s)
      if (c == ' ' || c == ':' || c == ',' || c == '(' || c == ')' || c == ';' || c == '[' || c == ']' || c == '\'')
        c = '_';
    return s;
  };
  std::vector<std::string> text(static_cast<std::size_t>(leaves) + merges.size());
  for (int i = 0; i < leaves; ++i) text[static_cast<std::size_t>(i)] = clean(labels[static_cast<std::size_t>(i)]);
  for (std::size_t k = 0; k < merges.size(); ++k) {
    const auto& m = merges[k];
    std::string s = "(" + text[static_cast<std::size_t>(m.left)] + ":" + format_number(m.height - height(m.left)) +
                    "," + text[static_cast<std::size_t>(m.right)] + ":" +
                    format_number(m.height - height(m.right)) + ")";
    if (confidence) s += format_number(confidence->at(k));
    text[static_cast<std::size_t>(leaves) + k] = std::move(s);
  }
  return text.back() + ";";
}

double adjusted_rand(const Partition& a, const Partition& b) {
  if (a.size() != b.size())
    throw Error("partitions cover different numbers of observations (" + std::to_string(a.size()) + " vs " +
                std::to_string(b.size()) + ")");
  std::map<std::pair<int, int>, double> table;
  std::map<int, double> rows;
  std::map<int, double> cols;
  for (std::size_t i = 0; i < a.size(); ++i) {
    table[{a[i], b[i]}] += 1.0;
    rows[a[i]] += 1.0;
    cols[b[i]] += 1.0;
  }
  double index = 0.0;
  for (const auto& [key, count] : table) index += choose2(count);
  double sum_rows = 0.0;
  for (const auto& [key, count] : rows) sum_rows += choose2(count);
  double sum_cols = 0.0;
  for (const auto& [key, count] : cols) sum_cols += choose2(count);
  const double total = choose2(static_cast<double>(a.size()));
  const double expected = total > 0.0 ? sum_rows * sum_cols / total : 0.0;
  const double max_index = 0.5 * (sum_rows + sum_cols);
  if (max_index == expected) return 1.0;
  return (index - expected) / (max_index - expected);
}

double average_silhouette(const Eigen::MatrixXd& distance, const Partition& partition) {
  const auto n = partition.size();
  if (static_cast<std::size_t>(distance.rows()) != n) throw Error("silhouette: partition and distance sizes differ");
  std::map<int, std::vector<std::size_t>> members;
  for (std::size_t i = 0; i < n; ++i) members[partition[i]].push_back(i);
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const auto& own = members[partition[i]];
    if (own.size() == 1) continue;
    double a = 0.0;
    for (std::size_t k : own) a += distance(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k));
    a /= static_cast<double>(own.size() - 1);
    double b = std::numeric_limits<double>::infinity();
    for (const auto& [label, other] : members) {
      if (label == partition[i]) continue;
      double s = 0.0;
      for (std::size_t k : other) s += distance(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k));
      b = std::min(b, s / static_cast<double>(other.size()));
    }
    if (!std::isfinite(b)) continue;
    const double denom = std::max(a, b);
    if (denom > 0.0) total += (b - a) / denom;
  }
  return n ? total / static_cast<double>(n) : 0.0;
}

std::vector<std::size_t> resample_columns(std::size_t columns, Rng& rng) {
  std::vector<std::size_t> out(columns);
  for (auto& c : out) c = rng.index(columns);
  return out;
}

std::vector<double> bootstrap_confidence(const std::vector<std::vector<double>>& rows, const Dendrogram& tree,
                                         int replicates, std::uint64_t seed, unsigned threads,
                                         const ColumnResampler& resample) {
  if (replicates < 1) throw Error("bootstrap needs at least one replicate");
  if (rows.size() != static_cast<std::size_t>(tree.leaves)) throw Error("bootstrap: rows and dendrogram disagree");
  const auto original = tree.leaf_sets();
  const auto columns = rows.empty() ? 0 : rows.front().size();
  std::vector<std::string> labels;
  for (std::size_t i = 0; i < rows.size(); ++i) labels.push_back("#" + std::to_string(i + 1));

  Rng master(seed);
  std::vector<std::uint64_t> seeds(static_cast<std::size_t>(replicates));
  for (auto& s : seeds) s = master.bits();

  std::vector<std::vector<std::uint8_t>> hits(static_cast<std::size_t>(replicates));
  parallel_for(seeds.size(), threads, [&](std::size_t r) {
    Rng rng(seeds[r]);
    const auto cols = resample(columns, rng);
    std::vector<std::vector<double>> sampled(rows.size());
    for (std::size_t i = 0; i < rows.size(); ++i) {
      sampled[i].reserve(cols.size());
      for (std::size_t c : cols) sampled[i].push_back(rows[i].at(c));
    }
    const auto boot = hclust_complete(correlation_distance(sampled, labels, false)).leaf_sets();
    const std::set<std::vector<int>> found(boot.begin(), boot.end());
    auto& h = hits[r];
    h.resize(original.size());
    for (std::size_t k = 0; k < original.size(); ++k) h[k] = found.count(original[k]) ? 1 : 0;
  });
  std::vector<double> confidence(original.size(), 0.0);
  for (const auto& h : hits)
    for (std::size_t k = 0; k < h.size(); ++k) confidence[k] += h[k];
  for (double& c : confidence) c /= replicates;
  return confidence;
}

std::vector<ClusterMetrics> posterior_clustering_summary(const std::vector<Eigen::MatrixXd>& distances,
                                                         const Partition* truth, unsigned threads) {
  if (distances.empty()) throw Error("clustering summary needs at least one draw");
  const auto n_obs = static_cast<int>(distances.front().rows());
  if (truth && static_cast<int>(truth->size()) != n_obs) throw Error("truth partition size does not match lanes");
  const int max_n = std::max(2, n_obs);
  const auto levels = static_cast<std::size_t>(max_n - 1);
  std::vector<std::vector<double>> ari(distances.size(), std::vector<double>(levels));
  std::vector<std::vector<double>> sil(distances.size(), std::vector<double>(levels));
  parallel_for(distances.size(), threads, [&](std::size_t k) {
    const auto tree = hclust_complete(distances[k]);
    for (int n = 2; n <= max_n; ++n) {
      const auto p = tree.cut(std::min(n, n_obs));
      const auto i = static_cast<std::size_t>(n - 2);
      sil[k][i] = average_silhouette(distances[k], p);
      ari[k][i] = truth ? adjusted_rand(p, *truth) : 0.0;
    }
  });
  std::vector<ClusterMetrics> out;
  for (std::size_t i = 0; i < levels; ++i) {
    ClusterMetrics m;
    m.n = static_cast<int>(i) + 2;
    m.has_truth = truth != nullptr;
    std::vector<double> a;
    double s = 0.0;
    for (std::size_t k = 0; k < distances.size(); ++k) {
      a.push_back(ari[k][i]);
      s += sil[k][i];
    }
    m.silhouette = s / static_cast<double>(distances.size());
    if (truth) {
      m.ari_mean = std::accumulate(a.begin(), a.end(), 0.0) / static_cast<double>(a.size());
      std::sort(a.begin(), a.end());
      m.ari_lo = quantile_sorted(a, 0.025);
      m.ari_hi = quantile_sorted(a, 0.975);
    }
    out.push_back(m);
  }
  return out;
}

}  // namespace gelwarp
