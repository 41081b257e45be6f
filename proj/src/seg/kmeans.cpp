#include "bexrl/seg/kmeans.hpp"

#include <limits>
#include <map>
#include <random>

#include "bexrl/util/error.hpp"
#include "bexrl/vq/quantize.hpp"

namespace bexrl::seg {
namespace {

using vq::squared_distance;

Points plus_plus_seeds(const Points& pts, std::size_t k, std::mt19937_64& rng) {
  const std::size_t n = pts.size();
  Points centers;
  centers.push_back(pts[std::uniform_int_distribution<std::size_t>(0, n - 1)(rng)]);
  std::vector<double> d2(n);
  while (centers.size() < k) {
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      double best = std::numeric_limits<double>::infinity();
      for (const auto& c : centers) best = std::min(best, squared_distance(pts[i], c));
      d2[i] = best;
      total += best;
    }
    std::size_t pick = 0;
    if (total > 0.0) {
      double r = std::uniform_real_distribution<double>(0.0, total)(rng);
      pick = n - 1;
      for (std::size_t i = 0; i < n; ++i) {
        if (r < d2[i]) {
          pick = i;
          break;
        }
        r -= d2[i];
      }
    } else {
      pick = std::uniform_int_distribution<std::size_t>(0, n - 1)(rng);
    }
    centers.push_back(pts[pick]);
  }
  return centers;
}

double assign(const Points& pts, const Points& centers, std::vector<int>& labels) {
  double inertia = 0.0;
  for (std::size_t i = 0; i < pts.size(); ++i) {
    int best = 0;
    double best_d = squared_distance(pts[i], centers[0]);
    for (std::size_t c = 1; c < centers.size(); ++c) {
      const double d = squared_distance(pts[i], centers[c]);
      if (d < best_d) {
        best_d = d;
        best = static_cast<int>(c);
      }
    }
    labels[i] = best;
    inertia += best_d;
  }
  return inertia;
}

// Moves the point farthest from its centroid (taken from a cluster with at
// least two members) into each empty cluster.
void fill_empty(const Points& pts, Points& centers, std::vector<int>& labels) {
  const std::size_t k = centers.size();
  for (std::size_t c = 0; c < k; ++c) {
    std::vector<std::size_t> sizes(k, 0);
    for (int l : labels) ++sizes[static_cast<std::size_t>(l)];
    if (sizes[c] > 0) continue;
    std::size_t far = pts.size();
    double far_d = -1.0;
    for (std::size_t i = 0; i < pts.size(); ++i) {
      const auto li = static_cast<std::size_t>(labels[i]);
      if (sizes[li] < 2) continue;
      const double d = squared_distance(pts[i], centers[li]);
      if (d > far_d) {
        far_d = d;
        far = i;
      }
    }
    if (far == pts.size()) continue;
    labels[far] = static_cast<int>(c);
    centers[c] = pts[far];
  }
}

Points centroids_of(const Points& pts, const std::vector<int>& labels, const Points& previous) {
  const std::size_t k = previous.size(), d = pts[0].size();
  Points sums(k, std::vector<double>(d, 0.0));
  std::vector<std::size_t> counts(k, 0);
  for (std::size_t i = 0; i < pts.size(); ++i) {
    const auto l = static_cast<std::size_t>(labels[i]);
    ++counts[l];
    for (std::size_t j = 0; j < d; ++j) sums[l][j] += pts[i][j];
  }
  for (std::size_t c = 0; c < k; ++c) {
    if (counts[c] == 0) {
      sums[c] = previous[c];
      continue;
    }
    for (auto& v : sums[c]) v /= static_cast<double>(counts[c]);
  }
  return sums;
}

}  // namespace

std::vector<int> canonical_labels(const std::vector<int>& labels) {
  std::map<int, int> remap;
  std::vector<int> out(labels.size());
  for (std::size_t i = 0; i < labels.size(); ++i) {
    auto [it, inserted] = remap.emplace(labels[i], static_cast<int>(remap.size()));
    out[i] = it->second;
  }
  return out;
}

KMeansResult kmeans(const Points& points, const KMeansConfig& cfg) {
  if (cfg.k < 1) fail(ErrorKind::kInvalidConfig, "k-means needs k >= 1");
  if (points.size() < cfg.k) {
    fail(ErrorKind::kInvalidConfig, "k-means: " + std::to_string(points.size()) + " points for k = " +
                                        std::to_string(cfg.k));
  }
  if (cfg.restarts < 1) fail(ErrorKind::kInvalidConfig, "k-means needs at least one restart");
  const std::size_t d = points[0].size();
  for (const auto& p : points) {
    if (p.size() != d) fail(ErrorKind::kDimMismatch, "k-means points of differing dimension");
  }

  KMeansResult best;
  best.inertia = std::numeric_limits<double>::infinity();
  std::vector<int> labels(points.size(), 0);
  for (int r = 0; r < cfg.restarts; ++r) {
    std::seed_seq seq{static_cast<std::uint32_t>(cfg.seed), static_cast<std::uint32_t>(cfg.seed >> 32),
                      static_cast<std::uint32_t>(r)};
    std::mt19937_64 rng(seq);
    Points centers = plus_plus_seeds(points, cfg.k, rng);
    assign(points, centers, labels);
    fill_empty(points, centers, labels);
    for (int it = 0; it < cfg.max_iterations; ++it) {
      centers = centroids_of(points, labels, centers);
      std::vector<int> next(points.size());
      assign(points, centers, next);
      fill_empty(points, centers, next);
      const bool stable = next == labels;
      labels = std::move(next);
      if (stable) break;
    }
    centers = centroids_of(points, labels, centers);
    double inertia = 0.0;
    for (std::size_t i = 0; i < points.size(); ++i) {
      inertia += squared_distance(points[i], centers[static_cast<std::size_t>(labels[i])]);
    }
    if (inertia < best.inertia) {
      best.inertia = inertia;
      best.labels = labels;
      best.centroids = centers;
      best.best_restart = r;
    }
  }

  // Renumber clusters (and their centroids) by first occurrence.
  const std::vector<int> canon = canonical_labels(best.labels);
  Points reordered(best.centroids.size());
  for (std::size_t i = 0; i < canon.size(); ++i) {
    reordered[static_cast<std::size_t>(canon[i])] = best.centroids[static_cast<std::size_t>(best.labels[i])];
  }
  best.labels = canon;
  best.centroids = std::move(reordered);
  return best;
}

}  // namespace bexrl::seg
