#pragma once

/// \file
/// Correlation-distance complete-linkage clustering of aligned lanes and the
/// scores used to judge it.

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "gelwarp/core.hpp"
#include "gelwarp/random.hpp"

namespace gelwarp {

/// Sample lanes of a grid as rows, with labels "<gel>_<lane>".
struct LaneMatrix {
  std::vector<std::string> labels;
  std::vector<std::vector<double>> rows;
};

LaneMatrix lane_matrix(const IntensityGrid& grid);

/// d(i, i') = 1 - Pearson correlation. With `strict`, a constant row throws
/// naming its label; otherwise it is given distance 1 to every other row.
Eigen::MatrixXd correlation_distance(const std::vector<std::vector<double>>& rows,
                                     const std::vector<std::string>& labels, bool strict = true);

/// Cluster labels 1..n, one per observation.
using Partition = std::vector<int>;

struct Merge {
  int left = 0;   ///< node id: leaves are 0..N-1, merge k creates node N+k
  int right = 0;
  double height = 0.0;
};

struct Dendrogram {
  int leaves = 0;
  std::vector<Merge> merges;

  /// Sorted leaf set of every merge node, in merge order.
  std::vector<std::vector<int>> leaf_sets() const;
  /// Partition into n clusters; labels follow the first leaf of each cluster.
  Partition cut(int n) const;
  /// Newick string with branch lengths from merge heights. `confidence`, if
  /// given, holds one value per merge and labels internal nodes.
  std::string newick(const std::vector<std::string>& labels, const std::vector<double>* confidence = nullptr) const;
};

/// Complete linkage. Ties go to the lexicographically smallest pair of
/// active clusters, each cluster identified by its smallest leaf.
Dendrogram hclust_complete(const Eigen::MatrixXd& distance);

double adjusted_rand(const Partition& a, const Partition& b);
/// Mean silhouette; observations in singleton clusters score 0.
double average_silhouette(const Eigen::MatrixXd& distance, const Partition& partition);

/// Column indices drawn for one bootstrap replicate.
using ColumnResampler = std::function<std::vector<std::size_t>(std::size_t columns, Rng& rng)>;
/// Uniform sampling with replacement.
std::vector<std::size_t> resample_columns(std::size_t columns, Rng& rng);

/// Fraction of bootstrap dendrograms (columns resampled, pooled over gels)
/// containing each merge's leaf set, one value per merge of `tree`.
std::vector<double> bootstrap_confidence(const std::vector<std::vector<double>>& rows, const Dendrogram& tree,
                                         int replicates, std::uint64_t seed, unsigned threads = 1,
                                         const ColumnResampler& resample = resample_columns);

struct ClusterMetrics {
  int n = 0;
  double ari_mean = 0.0;
  double ari_lo = 0.0;
  double ari_hi = 0.0;
  double silhouette = 0.0;  ///< mean over draws
  bool has_truth = false;
};

/// For n = 2..N, aRI of each draw's cut against `truth`
/// (mean, 2.5% and 97.5% quantiles) and mean silhouette. `distances` holds
/// one distance matrix per stored draw.
std::vector<ClusterMetrics> posterior_clustering_summary(const std::vector<Eigen::MatrixXd>& distances,
                                                         const Partition* truth, unsigned threads = 1);

}  // namespace gelwarp
