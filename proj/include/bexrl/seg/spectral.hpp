#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "bexrl/ad/tensor.hpp"
#include "bexrl/seg/behavior_graph.hpp"

namespace bexrl::seg {

struct SpectralDecomposition {
  ad::Tensor similarity;       // S = W + W^T
  std::vector<double> degree;  // D_ii = sum_j S_ij
  ad::Tensor laplacian;        // L = D - S
  std::vector<double> eigenvalues;  // ascending
  ad::Tensor eigenvectors;          // columns, orthonormal
};

// Unnormalized Laplacian eigendecomposition of a symmetric similarity matrix.
SpectralDecomposition decompose_similarity(const ad::Tensor& similarity);
SpectralDecomposition spectral_decompose(const BehaviorGraph& graph);

// k = argmax_{i in [k_min, k_max]} (ev_{i+1} - ev_i) with 1-indexed ascending
// eigenvalues; ties pick the smallest i. k_max = 0 means min(len - 1, 16).
std::size_t select_k(const std::vector<double>& eigenvalues, std::size_t k_min = 2, std::size_t k_max = 0);

// Clusters the rows of the n x k matrix of eigenvectors with the k smallest
// eigenvalues using k-means++ (50 restarts). Returns one label per node.
std::vector<int> spectral_cluster(const SpectralDecomposition& decomp, std::size_t k, std::uint64_t seed);

}  // namespace bexrl::seg
