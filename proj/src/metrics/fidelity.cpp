#include "bexrl/metrics/fidelity.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "bexrl/util/error.hpp"

namespace bexrl::metrics {

double policy_error(const attr::BcModel& policy, const attr::BcModel& cluster, const data::Observation& obs) {
  const auto target = attr::policy_action(policy, obs);
  const auto pred = cluster.predict(obs);
  if (policy.act_spec().is_discrete()) {
    return -std::log(pred[static_cast<std::size_t>(data::action_class(target))] + attr::kLogFloor);
  }
  double s = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) s += (target[i] - pred[i]) * (target[i] - pred[i]);
  return s / static_cast<double>(pred.size());
}

AfsResult average_fidelity(const attr::BcModel& policy, const std::vector<attr::BcModel>& clusters,
                           const seg::EpisodeLabels& labels, const data::Dataset& ds,
                           const attr::SampleSpec& spec) {
  if (clusters.empty()) fail(ErrorKind::kSpecMismatch, "fidelity needs at least one cluster model");
  if (labels.size() != ds.trajectories.size()) {
    fail(ErrorKind::kLengthMismatch, "labels cover " + std::to_string(labels.size()) + " episodes, dataset has " +
                                         std::to_string(ds.trajectories.size()));
  }
  const auto steps = attr::sample_steps(ds, spec);
  std::vector<int> sampled;
  sampled.reserve(steps.size());
  for (const auto& s : steps) {
    const auto& ep = labels[s.episode];
    if (ep.size() != ds.trajectories[s.episode].size()) {
      fail(ErrorKind::kLengthMismatch, "labels for episode " + std::to_string(s.episode) + " have the wrong length");
    }
    const int l = ep[s.t];
    if (l < 0 || static_cast<std::size_t>(l) >= clusters.size()) {
      fail(ErrorKind::kSpecMismatch, "label " + std::to_string(l) + " has no cluster model");
    }
    sampled.push_back(l);
  }
  std::vector<int> shuffled = sampled;
  std::mt19937_64 rng(spec.seed ^ 0x2545f4914f6cdd1dULL);
  std::shuffle(shuffled.begin(), shuffled.end(), rng);

  AfsResult out;
  out.samples = steps.size();
  if (steps.empty()) return out;
  for (std::size_t i = 0; i < steps.size(); ++i) {
    const auto& obs = ds.trajectories[steps[i].episode].observations[steps[i].t];
    out.attributed += policy_error(policy, clusters[static_cast<std::size_t>(sampled[i])], obs);
    out.random += policy_error(policy, clusters[static_cast<std::size_t>(shuffled[i])], obs);
  }
  out.attributed /= static_cast<double>(steps.size());
  out.random /= static_cast<double>(steps.size());
  return out;
}

}  // namespace bexrl::metrics
