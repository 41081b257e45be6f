#include "bexrl/seg/behavior_graph.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "bexrl/util/error.hpp"

namespace bexrl::seg {

std::size_t BehaviorGraph::node_index(std::size_t token) const {
  auto it = std::lower_bound(nodes.begin(), nodes.end(), token);
  if (it == nodes.end() || *it != token) return nodes.size();
  return static_cast<std::size_t>(it - nodes.begin());
}

namespace {

double median(std::vector<double> values) {
  std::sort(values.begin(), values.end());
  const std::size_t n = values.size();
  if (n % 2 == 1) return values[n / 2];
  return 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

}  // namespace

BehaviorGraph build_graph(const std::vector<vq::TokenSequence>& tokens, const vq::Codebook& codebook,
                          double lambda, DistanceTerm term) {
  if (!(lambda >= 0.0 && lambda <= 1.0)) {
    fail(ErrorKind::kInvalidLambda, "lambda must lie in [0, 1], got " + std::to_string(lambda));
  }
  std::set<std::size_t> seen;
  for (const auto& seq : tokens) {
    for (auto t : seq.tokens) {
      if (t >= codebook.size()) {
        fail(ErrorKind::kUnknownToken, "token " + std::to_string(t) + " outside codebook of size " +
                                           std::to_string(codebook.size()));
      }
      seen.insert(t);
    }
  }
  if (seen.empty()) fail(ErrorKind::kEmptyTokens, "no tokens to build a graph from");

  BehaviorGraph g;
  g.lambda = lambda;
  g.nodes.assign(seen.begin(), seen.end());
  const std::size_t n = g.nodes.size();
  g.counts.assign(n, std::vector<long>(n, 0));
  // Pairs never cross trajectory boundaries.
  for (const auto& seq : tokens) {
    for (std::size_t t = 1; t < seq.tokens.size(); ++t) {
      ++g.counts[g.node_index(seq.tokens[t - 1])][g.node_index(seq.tokens[t])];
    }
  }

  g.transition = ad::Tensor({n, n}, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    long row = 0;
    for (long c : g.counts[i]) row += c;
    if (row == 0) continue;
    for (std::size_t j = 0; j < n; ++j) {
      g.transition.at(i, j) = static_cast<double>(g.counts[i][j]) / static_cast<double>(row);
    }
  }

  ad::Tensor dist({n, n}, 0.0);
  std::vector<double> pair_dists;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      dist.at(i, j) = vq::squared_distance(codebook.code(g.nodes[i]), codebook.code(g.nodes[j]));
      if (i < j) pair_dists.push_back(dist.at(i, j));
    }
  g.sigma_sq = pair_dists.empty() ? 1.0 : median(pair_dists);
  if (!(g.sigma_sq > 0.0)) g.sigma_sq = 1.0;

  g.latent = ad::Tensor({n, n}, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      g.latent.at(i, j) = term == DistanceTerm::kKernel ? std::exp(-dist.at(i, j) / (2.0 * g.sigma_sq))
                                                        : dist.at(i, j);
    }

  g.weights = ad::Tensor({n, n}, 0.0);
  for (std::size_t i = 0; i < n * n; ++i) {
    g.weights[i] = (1.0 - lambda) * g.transition[i] + lambda * g.latent[i];
  }
  return g;
}

}  // namespace bexrl::seg
