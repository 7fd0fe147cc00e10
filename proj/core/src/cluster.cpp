#include "rrl/cluster.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <stdexcept>

namespace rrl {

namespace {

double sq_dist(const Eigen::RowVectorXd& a, const Eigen::RowVectorXd& b) {
  return (a - b).squaredNorm();
}

}  // namespace

KMeansResult kmeans(const Eigen::MatrixXd& points, int k, std::uint64_t seed,
                    int max_iters) {
  const Eigen::Index n = points.rows();
  if (k < 1) throw std::invalid_argument("kmeans: k must be >= 1");
  if (n < k) throw std::invalid_argument("kmeans: fewer points than clusters");

  std::mt19937_64 rng(seed);

  // k-means++ seeding.
  Eigen::MatrixXd centroids(k, points.cols());
  std::vector<double> d2(n, std::numeric_limits<double>::infinity());
  {
    std::uniform_int_distribution<Eigen::Index> first(0, n - 1);
    centroids.row(0) = points.row(first(rng));
    for (int c = 1; c < k; ++c) {
      double total = 0.0;
      for (Eigen::Index i = 0; i < n; ++i) {
        d2[i] = std::min(d2[i], sq_dist(points.row(i), centroids.row(c - 1)));
        total += d2[i];
      }
      Eigen::Index pick = 0;
      if (total > 0.0) {
        std::uniform_real_distribution<double> u(0.0, total);
        double target = u(rng);
        double acc = 0.0;
        for (Eigen::Index i = 0; i < n; ++i) {
          acc += d2[i];
          if (acc >= target) {
            pick = i;
            break;
          }
        }
      } else {
        pick = std::uniform_int_distribution<Eigen::Index>(0, n - 1)(rng);
      }
      centroids.row(c) = points.row(pick);
    }
  }

  KMeansResult res;
  res.assignment.assign(n, -1);
  for (int iter = 0; iter < max_iters; ++iter) {
    bool changed = false;
    for (Eigen::Index i = 0; i < n; ++i) {
      int best = 0;
      double best_d = sq_dist(points.row(i), centroids.row(0));
      for (int c = 1; c < k; ++c) {
        const double d = sq_dist(points.row(i), centroids.row(c));
        if (d < best_d) {
          best_d = d;
          best = c;
        }
      }
      if (res.assignment[i] != best) {
        res.assignment[i] = best;
        changed = true;
      }
    }
    if (!changed && iter > 0) break;

    Eigen::MatrixXd sums = Eigen::MatrixXd::Zero(k, points.cols());
    std::vector<int> counts(k, 0);
    for (Eigen::Index i = 0; i < n; ++i) {
      sums.row(res.assignment[i]) += points.row(i);
      ++counts[res.assignment[i]];
    }
    for (int c = 0; c < k; ++c) {
      if (counts[c] > 0) {
        centroids.row(c) = sums.row(c) / counts[c];
      } else {
        // Refill an empty cluster with the point farthest from its centroid.
        Eigen::Index far = 0;
        double far_d = -1.0;
        for (Eigen::Index i = 0; i < n; ++i) {
          const double d =
              sq_dist(points.row(i), centroids.row(res.assignment[i]));
          if (d > far_d) {
            far_d = d;
            far = i;
          }
        }
        centroids.row(c) = points.row(far);
        res.assignment[far] = c;
      }
    }
  }

  res.centroids = centroids;
  res.inertia = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    res.inertia += sq_dist(points.row(i), centroids.row(res.assignment[i]));
  }
  return res;
}

double silhouette_score(const Eigen::MatrixXd& points,
                        const std::vector<int>& assignment) {
  const Eigen::Index n = points.rows();
  if (static_cast<Eigen::Index>(assignment.size()) != n) {
    throw std::invalid_argument("silhouette: assignment size mismatch");
  }
  int k = 0;
  for (int a : assignment) k = std::max(k, a + 1);
  std::vector<int> counts(k, 0);
  for (int a : assignment) {
    if (a < 0) throw std::invalid_argument("silhouette: negative cluster id");
    ++counts[a];
  }
  int nonempty = 0;
  for (int c : counts) nonempty += (c > 0);
  if (nonempty < 2 || nonempty > n - 1) {
    throw std::invalid_argument("silhouette: needs 2 <= clusters <= n-1");
  }

  double total = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const int ci = assignment[i];
    if (counts[ci] == 1) continue;  // singleton contributes 0
    double a_sum = 0.0;
    std::vector<double> b_sum(k, 0.0);
    for (Eigen::Index j = 0; j < n; ++j) {
      if (i == j) continue;
      const double d = std::sqrt(sq_dist(points.row(i), points.row(j)));
      if (assignment[j] == ci) {
        a_sum += d;
      } else {
        b_sum[assignment[j]] += d;
      }
    }
    const double a = a_sum / (counts[ci] - 1);
    double b = std::numeric_limits<double>::infinity();
    for (int c = 0; c < k; ++c) {
      if (c == ci || counts[c] == 0) continue;
      b = std::min(b, b_sum[c] / counts[c]);
    }
    const double denom = std::max(a, b);
    total += denom > 0.0 ? (b - a) / denom : 0.0;
  }
  return total / static_cast<double>(n);
}

BestClustering select_k_by_silhouette(const Eigen::MatrixXd& points, int k_min,
                                      int k_max, std::uint64_t seed) {
  if (k_min < 2) throw std::invalid_argument("select_k: k_min must be >= 2");
  if (k_max < k_min) throw std::invalid_argument("select_k: empty k range");
  BestClustering best;
  best.silhouette = -std::numeric_limits<double>::infinity();
  for (int k = k_min; k <= k_max; ++k) {
    KMeansResult r = kmeans(points, k, seed + static_cast<std::uint64_t>(k));
    const double s = silhouette_score(points, r.assignment);
    if (s > best.silhouette) {
      best.k = k;
      best.silhouette = s;
      best.result = std::move(r);
    }
  }
  return best;
}

}  // namespace rrl
