#include "bexrl/seg/spectral.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "bexrl/seg/jacobi.hpp"
#include "bexrl/seg/kmeans.hpp"
#include "bexrl/util/error.hpp"

namespace bexrl::seg {

SpectralDecomposition decompose_similarity(const ad::Tensor& similarity) {
  if (similarity.rank() != 2 || similarity.dim(0) != similarity.dim(1)) {
    fail(ErrorKind::kShape, "similarity must be square, got " + ad::shape_str(similarity.shape()));
  }
  const std::size_t n = similarity.dim(0);
  if (n < 2) fail(ErrorKind::kTooFewNodes, "spectral decomposition needs >= 2 nodes");
  SpectralDecomposition d;
  d.similarity = similarity;
  d.degree.assign(n, 0.0);
  d.laplacian = ad::Tensor({n, n}, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) d.degree[i] += similarity.at(i, j);
  }
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      d.laplacian.at(i, j) = (i == j ? d.degree[i] : 0.0) - similarity.at(i, j);
    }
  SymmetricEigen eig = jacobi_eigen(d.laplacian);
  d.eigenvalues = std::move(eig.eigenvalues);
  d.eigenvectors = std::move(eig.eigenvectors);
  return d;
}

SpectralDecomposition spectral_decompose(const BehaviorGraph& graph) {
  const std::size_t n = graph.size();
  if (n < 2) fail(ErrorKind::kTooFewNodes, "graph has " + std::to_string(n) + " node(s); need >= 2");
  ad::Tensor s({n, n}, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) s.at(i, j) = graph.weights.at(i, j) + graph.weights.at(j, i);
  return decompose_similarity(s);
}

std::size_t select_k(const std::vector<double>& eigenvalues, std::size_t k_min, std::size_t k_max) {
  const std::size_t len = eigenvalues.size();
  if (k_min < 1 || len < k_min + 1) {
    fail(ErrorKind::kTooFewNodes, "eigengap needs at least " + std::to_string(k_min + 1) + " eigenvalues, got " +
                                      std::to_string(len));
  }
  if (k_max == 0) k_max = std::min<std::size_t>(len - 1, 16);
  k_max = std::min(k_max, len - 1);
  if (k_max < k_min) k_max = k_min;
  std::size_t best = k_min;
  double best_gap = -std::numeric_limits<double>::infinity();
  for (std::size_t i = k_min; i <= k_max; ++i) {
    // 1-indexed ev_{i+1} - ev_i == eigenvalues[i] - eigenvalues[i-1]
    const double gap = eigenvalues[i] - eigenvalues[i - 1];
    if (gap > best_gap) {
      best_gap = gap;
      best = i;
    }
  }
  return best;
}

std::vector<int> spectral_cluster(const SpectralDecomposition& decomp, std::size_t k, std::uint64_t seed) {
  const std::size_t n = decomp.eigenvalues.size();
  if (k < 2) fail(ErrorKind::kInvalidConfig, "spectral clustering needs k >= 2");
  if (k > n) fail(ErrorKind::kTooFewNodes, "k = " + std::to_string(k) + " exceeds " + std::to_string(n) + " nodes");
  Points rows(n, std::vector<double>(k));
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < k; ++j) rows[i][j] = decomp.eigenvectors.at(i, j);
  bool all_same = true;
  for (std::size_t i = 1; i < n && all_same; ++i) {
    for (std::size_t j = 0; j < k; ++j) {
      if (std::abs(rows[i][j] - rows[0][j]) > 1e-12) {
        all_same = false;
        break;
      }
    }
  }
  if (all_same) fail(ErrorKind::kDegenerateEmbedding, "all spectral embedding rows are identical");
  KMeansConfig cfg;
  cfg.k = k;
  cfg.seed = seed;
  return kmeans(rows, cfg).labels;
}

}  // namespace bexrl::seg
