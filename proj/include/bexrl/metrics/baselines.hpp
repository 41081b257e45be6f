#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "bexrl/data/dataset.hpp"
#include "bexrl/seg/kmeans.hpp"
#include "bexrl/vq/model.hpp"
#include "bexrl/vq/quantize.hpp"

namespace bexrl::metrics {

struct StructureScores {
  double silhouette = 0.0;
  double davies_bouldin = 0.0;
  bool degenerate = false;  // every cluster is a single point
  std::vector<int> labels;
};

// Scores a labeling of points; degenerate singleton clusterings skip DB
// (reported as 0) since every spread is zero.
StructureScores score_structure(const seg::Points& points, std::vector<int> labels);

// Codebook vectors of the tokens that occur in `tokens`, ascending by token id.
seg::Points appearing_codes(const vq::Codebook& codebook, const std::vector<vq::TokenSequence>& tokens,
                            std::vector<std::size_t>* token_ids = nullptr);

// k-means on concatenated (flattened observation, encoded action) vectors.
StructureScores raw_pair_baseline(const data::Dataset& ds, std::size_t k, std::uint64_t seed);

// k-means directly on the code vectors of appearing tokens.
StructureScores kmeans_latent_baseline(const vq::Codebook& codebook, const std::vector<vq::TokenSequence>& tokens,
                                       std::size_t k, std::uint64_t seed);

}  // namespace bexrl::metrics
