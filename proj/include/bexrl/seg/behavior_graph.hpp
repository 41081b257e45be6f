#pragma once

#include <cstddef>
#include <vector>

#include "bexrl/ad/tensor.hpp"
#include "bexrl/vq/model.hpp"
#include "bexrl/vq/quantize.hpp"

namespace bexrl::seg {

// How the latent-distance term enters the edge weight.
enum class DistanceTerm {
  kKernel,  // exp(-||ci - cj||^2 / (2 sigma^2)), sigma^2 = median pairwise squared distance
  kRaw,     // ||ci - cj||^2 as written, larger distance = heavier edge
};

// Graph over the codebook tokens that occur in the data. Node i is token nodes[i].
struct BehaviorGraph {
  std::vector<std::size_t> nodes;            // ascending token ids
  std::vector<std::vector<long>> counts;     // n_ij, consecutive-pair counts
  ad::Tensor transition;                     // row-normalized counts
  ad::Tensor latent;                         // similarity (or raw distance) term
  ad::Tensor weights;                        // w_ij = (1 - lambda) * transition + lambda * latent
  double lambda = 0.5;
  double sigma_sq = 1.0;

  std::size_t size() const { return nodes.size(); }
  // Index of `token` in `nodes`, or size() when absent.
  std::size_t node_index(std::size_t token) const;
};

BehaviorGraph build_graph(const std::vector<vq::TokenSequence>& tokens, const vq::Codebook& codebook,
                          double lambda, DistanceTerm term = DistanceTerm::kKernel);

}  // namespace bexrl::seg
