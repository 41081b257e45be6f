#pragma once

#include <cstddef>
#include <map>
#include <vector>

#include "bexrl/vq/model.hpp"

namespace bexrl::seg {

using EpisodeLabels = std::vector<std::vector<int>>;

struct ClusterAssignment {
  std::size_t k = 0;
  std::map<std::size_t, int> token_to_cluster;
  EpisodeLabels episodes;  // per-trajectory, per-timestep labels after smoothing
  double lambda = 0.0;
  std::vector<double> eigenvalues;
};

// label(t) = cluster(token(t)). Throws UnknownToken for unmapped tokens.
EpisodeLabels label_timesteps(const std::vector<vq::TokenSequence>& tokens,
                              const std::map<std::size_t, int>& token_to_cluster);

// A timestep whose label differs from both neighbours takes the unique most
// frequent label of its centered window (truncated at the ends); ties keep the
// original. One left-to-right pass that reads only the input labels.
EpisodeLabels smooth_labels(const EpisodeLabels& labels, std::size_t window = 5);
std::vector<int> smooth_sequence(const std::vector<int>& labels, std::size_t window = 5);

}  // namespace bexrl::seg
