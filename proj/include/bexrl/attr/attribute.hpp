#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "bexrl/attr/bc_model.hpp"
#include "bexrl/data/dataset.hpp"

namespace bexrl::attr {

struct Attribution {
  int cluster = 0;
  std::vector<double> scores;
};

// scores[k] = mean_i (a_i - pred_k_i)^2; cluster = argmin, ties to the lowest k.
// Scores within a relative 1e-12 of each other are treated as tied.
Attribution attribute_continuous(std::span<const double> action, const std::vector<std::vector<double>>& predictions);

// scores[k] = -log(p_k[a] + 1e-12) for the one-hot of the taken class a.
Attribution attribute_discrete(int action_class, const std::vector<std::vector<double>>& distributions);

inline constexpr double kLogFloor = 1e-12;

struct SampleSpec {
  std::size_t episodes = 20;
  std::size_t actions_per_episode = 10;
  std::uint64_t seed = 0;
};

struct SampledStep {
  std::size_t episode = 0;
  std::size_t t = 0;
  bool operator==(const SampledStep&) const = default;
};

// Episodes, then timesteps within each, drawn without replacement. Returned in
// (episode, t) order. Short datasets yield fewer samples.
std::vector<SampledStep> sample_steps(const data::Dataset& ds, const SampleSpec& spec);

// Continuous: the network output. Discrete: the argmax class.
data::Action policy_action(const BcModel& policy, const data::Observation& observation);

struct AttributionRecord {
  std::size_t episode = 0;
  std::size_t t = 0;
  data::Action action;
  std::vector<double> scores;
  int k_star = 0;
};

struct AttributionResult {
  std::size_t num_clusters = 0;
  std::vector<AttributionRecord> records;
};

AttributionResult attribute_dataset(const BcModel& policy, const std::vector<BcModel>& clusters,
                                    const data::Dataset& ds, const SampleSpec& spec);

// Columns: episode, t, action (JSON), score_0..score_{k-1}, k_star.
std::string attribution_csv(const AttributionResult& result);

}  // namespace bexrl::attr
