#include "bexrl/seg/labels.hpp"

#include <algorithm>

#include "bexrl/util/error.hpp"

namespace bexrl::seg {

EpisodeLabels label_timesteps(const std::vector<vq::TokenSequence>& tokens,
                              const std::map<std::size_t, int>& token_to_cluster) {
  EpisodeLabels out;
  out.reserve(tokens.size());
  for (const auto& seq : tokens) {
    std::vector<int> labels;
    labels.reserve(seq.tokens.size());
    for (auto t : seq.tokens) {
      auto it = token_to_cluster.find(t);
      if (it == token_to_cluster.end()) fail(ErrorKind::kUnknownToken, "token " + std::to_string(t) + " has no cluster");
      labels.push_back(it->second);
    }
    out.push_back(std::move(labels));
  }
  return out;
}

std::vector<int> smooth_sequence(const std::vector<int>& labels, std::size_t window) {
  if (window < 3 || window % 2 == 0) {
    fail(ErrorKind::kInvalidWindow, "smoothing window must be odd and >= 3, got " + std::to_string(window));
  }
  const std::size_t half = window / 2;
  std::vector<int> out = labels;
  for (std::size_t t = 1; t + 1 < labels.size(); ++t) {
    if (labels[t] == labels[t - 1] || labels[t] == labels[t + 1]) continue;
    const std::size_t lo = t >= half ? t - half : 0;
    const std::size_t hi = std::min(labels.size() - 1, t + half);
    std::vector<std::pair<int, int>> counts;  // (label, count) in first-seen order
    for (std::size_t i = lo; i <= hi; ++i) {
      auto it = std::find_if(counts.begin(), counts.end(), [&](const auto& c) { return c.first == labels[i]; });
      if (it == counts.end()) counts.emplace_back(labels[i], 1);
      else ++it->second;
    }
    int best_count = 0;
    for (const auto& c : counts) best_count = std::max(best_count, c.second);
    int winners = 0, winner = labels[t];
    for (const auto& c : counts) {
      if (c.second == best_count) {
        ++winners;
        winner = c.first;
      }
    }
    if (winners == 1) out[t] = winner;
  }
  return out;
}

EpisodeLabels smooth_labels(const EpisodeLabels& labels, std::size_t window) {
  EpisodeLabels out;
  out.reserve(labels.size());
  for (const auto& seq : labels) out.push_back(smooth_sequence(seq, window));
  return out;
}

}  // namespace bexrl::seg
