#include "bexrl/metrics/baselines.hpp"

#include <set>

#include "bexrl/metrics/cluster_metrics.hpp"
#include "bexrl/util/error.hpp"

namespace bexrl::metrics {

StructureScores score_structure(const seg::Points& points, std::vector<int> labels) {
  StructureScores out;
  out.silhouette = silhouette(points, labels);
  const std::set<int> distinct(labels.begin(), labels.end());
  out.degenerate = distinct.size() == points.size();
  out.davies_bouldin = out.degenerate ? 0.0 : davies_bouldin(points, labels);
  out.labels = std::move(labels);
  return out;
}

seg::Points appearing_codes(const vq::Codebook& codebook, const std::vector<vq::TokenSequence>& tokens,
                            std::vector<std::size_t>* token_ids) {
  std::set<std::size_t> used;
  for (const auto& seq : tokens) used.insert(seq.tokens.begin(), seq.tokens.end());
  seg::Points out;
  for (std::size_t t : used) {
    if (t >= codebook.size()) fail(ErrorKind::kUnknownToken, "token " + std::to_string(t) + " outside the codebook");
    const auto c = codebook.code(t);
    out.emplace_back(c.begin(), c.end());
  }
  if (token_ids) token_ids->assign(used.begin(), used.end());
  return out;
}

StructureScores raw_pair_baseline(const data::Dataset& ds, std::size_t k, std::uint64_t seed) {
  if (k < 2) fail(ErrorKind::kSingleCluster, "raw-pair baseline needs k >= 2");
  seg::Points points;
  points.reserve(ds.total_steps());
  for (const auto& traj : ds.trajectories) {
    for (std::size_t t = 0; t < traj.size(); ++t) {
      std::vector<double> p = traj.observations[t];
      data::encode_action(ds.act_spec, traj.actions[t], p);
      points.push_back(std::move(p));
    }
  }
  auto result = seg::kmeans(points, {k, seed});
  return score_structure(points, std::move(result.labels));
}

StructureScores kmeans_latent_baseline(const vq::Codebook& codebook, const std::vector<vq::TokenSequence>& tokens,
                                       std::size_t k, std::uint64_t seed) {
  if (k < 2) fail(ErrorKind::kSingleCluster, "k-means baseline needs k >= 2");
  const auto points = appearing_codes(codebook, tokens);
  if (points.size() < k) {
    fail(ErrorKind::kTooFewNodes, std::to_string(points.size()) + " appearing tokens for k = " + std::to_string(k));
  }
  auto result = seg::kmeans(points, {k, seed});
  return score_structure(points, std::move(result.labels));
}

}  // namespace bexrl::metrics
