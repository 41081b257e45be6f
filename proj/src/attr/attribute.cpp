#include "bexrl/attr/attribute.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <numeric>
#include <random>
#include <sstream>

#include <json.hpp>

#include "bexrl/util/error.hpp"

namespace bexrl::attr {

namespace {

// Relative gap below which two scores count as tied.
constexpr double kTieTolerance = 1e-12;

int argmin(const std::vector<double>& scores) {
  int best = 0;
  for (std::size_t k = 1; k < scores.size(); ++k) {
    const double b = scores[static_cast<std::size_t>(best)];
    if (scores[k] < b - kTieTolerance * std::abs(b)) best = static_cast<int>(k);
  }
  return best;
}

void check_models(const BcModel& policy, const std::vector<BcModel>& clusters, const data::Dataset& ds) {
  auto check = [&](const BcModel& m, const std::string& what) {
    if (!(m.obs_spec() == ds.obs_spec) || !(m.act_spec() == ds.act_spec)) {
      fail(ErrorKind::kSpecMismatch, what + " was trained on a different observation/action spec than the dataset");
    }
  };
  check(policy, "policy");
  for (std::size_t k = 0; k < clusters.size(); ++k) check(clusters[k], "cluster model " + std::to_string(k));
}

std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

}  // namespace

Attribution attribute_continuous(std::span<const double> action, const std::vector<std::vector<double>>& predictions) {
  if (predictions.empty()) fail(ErrorKind::kDimMismatch, "no cluster predictions to attribute against");
  if (action.empty()) fail(ErrorKind::kDimMismatch, "empty action vector");
  Attribution out;
  out.scores.reserve(predictions.size());
  for (std::size_t k = 0; k < predictions.size(); ++k) {
    const auto& p = predictions[k];
    if (p.size() != action.size()) {
      fail(ErrorKind::kDimMismatch, "prediction " + std::to_string(k) + " has dim " + std::to_string(p.size()) +
                                        ", action has dim " + std::to_string(action.size()));
    }
    double s = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) s += (action[i] - p[i]) * (action[i] - p[i]);
    out.scores.push_back(s / static_cast<double>(p.size()));
  }
  out.cluster = argmin(out.scores);
  return out;
}

Attribution attribute_discrete(int action_class, const std::vector<std::vector<double>>& distributions) {
  if (distributions.empty()) fail(ErrorKind::kInvalidDistribution, "no cluster distributions to attribute against");
  Attribution out;
  out.scores.reserve(distributions.size());
  const std::size_t classes = distributions.front().size();
  if (action_class < 0 || static_cast<std::size_t>(action_class) >= classes) {
    fail(ErrorKind::kDimMismatch, "action class " + std::to_string(action_class) + " outside [0, " +
                                      std::to_string(classes) + ")");
  }
  for (std::size_t k = 0; k < distributions.size(); ++k) {
    const auto& p = distributions[k];
    if (p.size() != classes) fail(ErrorKind::kDimMismatch, "distribution " + std::to_string(k) + " has wrong size");
    double total = 0.0;
    for (double v : p) {
      if (!(v >= 0.0) || !std::isfinite(v)) {
        fail(ErrorKind::kInvalidDistribution, "distribution " + std::to_string(k) + " has an invalid entry");
      }
      total += v;
    }
    if (std::abs(total - 1.0) > 1e-6) {
      fail(ErrorKind::kInvalidDistribution,
           "distribution " + std::to_string(k) + " sums to " + format_double(total));
    }
    out.scores.push_back(-std::log(p[static_cast<std::size_t>(action_class)] + kLogFloor));
  }
  out.cluster = argmin(out.scores);
  return out;
}

std::vector<SampledStep> sample_steps(const data::Dataset& ds, const SampleSpec& spec) {
  std::mt19937_64 rng(spec.seed);
  std::vector<std::size_t> episodes(ds.trajectories.size());
  std::iota(episodes.begin(), episodes.end(), 0);
  std::shuffle(episodes.begin(), episodes.end(), rng);
  episodes.resize(std::min(spec.episodes, episodes.size()));
  std::sort(episodes.begin(), episodes.end());

  std::vector<SampledStep> out;
  for (std::size_t e : episodes) {
    std::vector<std::size_t> steps(ds.trajectories[e].size());
    std::iota(steps.begin(), steps.end(), 0);
    std::shuffle(steps.begin(), steps.end(), rng);
    steps.resize(std::min(spec.actions_per_episode, steps.size()));
    std::sort(steps.begin(), steps.end());
    for (std::size_t t : steps) out.push_back({e, t});
  }
  return out;
}

data::Action policy_action(const BcModel& policy, const data::Observation& observation) {
  auto out = policy.predict(observation);
  if (!policy.act_spec().is_discrete()) return out;
  const auto best = std::max_element(out.begin(), out.end()) - out.begin();
  return {static_cast<double>(best)};
}

AttributionResult attribute_dataset(const BcModel& policy, const std::vector<BcModel>& clusters,
                                    const data::Dataset& ds, const SampleSpec& spec) {
  if (clusters.empty()) fail(ErrorKind::kSpecMismatch, "attribution needs at least one cluster model");
  check_models(policy, clusters, ds);
  AttributionResult result;
  result.num_clusters = clusters.size();
  for (const auto& step : sample_steps(ds, spec)) {
    const auto& obs = ds.trajectories[step.episode].observations[step.t];
    AttributionRecord rec;
    rec.episode = step.episode;
    rec.t = step.t;
    rec.action = policy_action(policy, obs);
    std::vector<std::vector<double>> preds;
    preds.reserve(clusters.size());
    for (const auto& m : clusters) preds.push_back(m.predict(obs));
    const Attribution a = ds.act_spec.is_discrete() ? attribute_discrete(data::action_class(rec.action), preds)
                                                    : attribute_continuous(rec.action, preds);
    rec.scores = a.scores;
    rec.k_star = a.cluster;
    result.records.push_back(std::move(rec));
  }
  return result;
}

std::string attribution_csv(const AttributionResult& result) {
  std::ostringstream os;
  os << "episode,t,action";
  for (std::size_t k = 0; k < result.num_clusters; ++k) os << ",score_" << k;
  os << ",k_star\n";
  for (const auto& r : result.records) {
    std::string action = "[";
    for (std::size_t i = 0; i < r.action.size(); ++i) {
      if (i) action += ",";
      action += format_double(r.action[i]);
    }
    action += "]";
    os << r.episode << ',' << r.t << ",\"" << action << '"';
    for (double s : r.scores) os << ',' << format_double(s);
    os << ',' << r.k_star << '\n';
  }
  return os.str();
}

}  // namespace bexrl::attr
