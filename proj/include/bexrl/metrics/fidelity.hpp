#pragma once

#include <cstddef>
#include <vector>

#include "bexrl/attr/attribute.hpp"
#include "bexrl/seg/labels.hpp"

namespace bexrl::metrics {

struct AfsResult {
  double attributed = 0.0;
  double random = 0.0;
  std::size_t samples = 0;
};

// Error between the policy and one cluster model at a state: MSE of the two
// continuous outputs, or -log p_k(argmax pi) for discrete actions.
double policy_error(const attr::BcModel& policy, const attr::BcModel& cluster, const data::Observation& obs);

// Average Fidelity Score over sampled timesteps, scoring each against the
// model of its own label and, for the random baseline, against a random
// permutation of the sampled labels (cluster sizes preserved).
AfsResult average_fidelity(const attr::BcModel& policy, const std::vector<attr::BcModel>& clusters,
                           const seg::EpisodeLabels& labels, const data::Dataset& ds,
                           const attr::SampleSpec& spec);

}  // namespace bexrl::metrics
