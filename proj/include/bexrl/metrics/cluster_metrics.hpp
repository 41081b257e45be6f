#pragma once

#include <vector>

#include "bexrl/seg/kmeans.hpp"

namespace bexrl::metrics {

// Mean silhouette under Euclidean distance. Points in singleton clusters score 0,
// as do points with a = b = 0. Throws SingleCluster with fewer than two labels.
double silhouette(const seg::Points& points, const std::vector<int>& labels);

// Mean over clusters of max_{j != i} (s_i + s_j) / d_ij. Throws SingleCluster,
// or CoincidentCentroids when two centroids coincide.
double davies_bouldin(const seg::Points& points, const std::vector<int>& labels);

// Adjusted Rand index from the contingency table. Two labelings that are both a
// single cluster (or both all singletons) score 1.
double adjusted_rand(const std::vector<int>& a, const std::vector<int>& b);

}  // namespace bexrl::metrics
