#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

namespace bexrl::seg {

using Points = std::vector<std::vector<double>>;

struct KMeansConfig {
  std::size_t k = 2;
  std::uint64_t seed = 0;
  int restarts = 50;
  int max_iterations = 300;
};

struct KMeansResult {
  std::vector<int> labels;  // canonical: clusters numbered by first occurrence
  Points centroids;
  double inertia = 0.0;
  int best_restart = 0;
};

// Lloyd iterations from k-means++ seeds. Restart r draws from its own RNG
// stream seeded with (seed, r); the lowest inertia wins and ties keep the
// earlier restart. Every cluster is kept nonempty when points >= k.
KMeansResult kmeans(const Points& points, const KMeansConfig& cfg);

// Renumber labels so clusters appear in order of first occurrence.
std::vector<int> canonical_labels(const std::vector<int>& labels);

}  // namespace bexrl::seg
