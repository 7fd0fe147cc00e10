#pragma once

#include <cstdint>
#include <vector>

#include <Eigen/Core>

namespace rrl {

struct KMeansResult {
  std::vector<int> assignment;   // one cluster id per point
  Eigen::MatrixXd centroids;     // k x dim
  double inertia = 0.0;
};

/// Lloyd's algorithm with k-means++ seeding; deterministic under `seed`.
/// Points are rows. Empty clusters are refilled with the point farthest
/// from its centroid.
KMeansResult kmeans(const Eigen::MatrixXd& points, int k, std::uint64_t seed,
                    int max_iters = 100);

/// Mean silhouette coefficient over all points (Euclidean distances).
/// Singleton clusters contribute 0. Requires 2 <= k <= n-1 effective
/// clusters; throws otherwise.
double silhouette_score(const Eigen::MatrixXd& points,
                        const std::vector<int>& assignment);

/// Runs kmeans for every k in [k_min, k_max] and returns the clustering
/// with the highest silhouette (lowest k wins ties).
struct BestClustering {
  int k = 0;
  double silhouette = 0.0;
  KMeansResult result;
};
BestClustering select_k_by_silhouette(const Eigen::MatrixXd& points, int k_min,
                                      int k_max, std::uint64_t seed);

}  // namespace rrl
