#pragma once

// Independent reference implementations shared by the unit tests and the
// acceptance binary. None of these call into the code they check.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <map>
#include <random>
#include <vector>

#include "bexrl/ad/graph.hpp"

namespace bexrl::oracle {

struct GradCheck {
  double worst_relative = 0.0;
  std::size_t checked = 0;
};

// Compares analytic gradients of `loss_fn` with central differences for every
// scalar of every leaf in `leaves`. loss_fn must rebuild the graph each call.
inline GradCheck finite_difference_check(std::vector<ad::Var> leaves, const std::function<ad::Var()>& loss_fn,
                                         double eps = 1e-5, double floor = 1e-6) {
  for (auto& leaf : leaves) leaf.zero_grad();
  ad::backward(loss_fn());
  GradCheck out;
  for (auto& leaf : leaves) {
    const ad::Tensor analytic = leaf.grad();
    ad::Tensor& w = leaf.mutable_value();
    for (std::size_t i = 0; i < w.size(); ++i) {
      const double orig = w[i];
      w[i] = orig + eps;
      const double up = loss_fn().value().item();
      w[i] = orig - eps;
      const double down = loss_fn().value().item();
      w[i] = orig;
      const double numeric = (up - down) / (2.0 * eps);
      const double denom = std::max({std::abs(analytic[i]), std::abs(numeric), floor});
      out.worst_relative = std::max(out.worst_relative, std::abs(analytic[i] - numeric) / denom);
      ++out.checked;
    }
  }
  return out;
}

// Exhaustive nearest neighbour under squared Euclidean distance; the first
// index wins exact ties.
inline std::size_t brute_nearest(const std::vector<double>& z, const std::vector<std::vector<double>>& codes) {
  std::size_t best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < codes.size(); ++i) {
    double d = 0.0;
    for (std::size_t c = 0; c < z.size(); ++c) d += (z[c] - codes[i][c]) * (z[c] - codes[i][c]);
    if (d < best_d) {
      best_d = d;
      best = i;
    }
  }
  return best;
}

// Adjusted Rand index from explicit pair counting over all n(n-1)/2 pairs.
inline double pair_count_ari(const std::vector<int>& a, const std::vector<int>& b) {
  double same_both = 0, same_a = 0, same_b = 0, neither = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    for (std::size_t j = i + 1; j < a.size(); ++j) {
      const bool sa = a[i] == a[j], sb = b[i] == b[j];
      if (sa && sb) ++same_both;
      else if (sa) ++same_a;
      else if (sb) ++same_b;
      else ++neither;
    }
  }
  const double denom = (same_both + same_a) * (same_a + neither) + (same_both + same_b) * (same_b + neither);
  if (denom == 0.0) return 1.0;
  return 2.0 * (same_both * neither - same_a * same_b) / denom;
}

// Brute-force silhouette straight from the definition.
inline double brute_silhouette(const std::vector<std::vector<double>>& pts, const std::vector<int>& labels) {
  auto dist = [&](std::size_t i, std::size_t j) {
    double s = 0.0;
    for (std::size_t c = 0; c < pts[i].size(); ++c) s += (pts[i][c] - pts[j][c]) * (pts[i][c] - pts[j][c]);
    return std::sqrt(s);
  };
  std::map<int, std::size_t> sizes;
  for (int l : labels) ++sizes[l];
  double total = 0.0;
  for (std::size_t i = 0; i < pts.size(); ++i) {
    if (sizes[labels[i]] == 1) continue;
    std::map<int, double> sums;
    for (std::size_t j = 0; j < pts.size(); ++j)
      if (j != i) sums[labels[j]] += dist(i, j);
    const double a = sums[labels[i]] / static_cast<double>(sizes[labels[i]] - 1);
    double b = std::numeric_limits<double>::infinity();
    for (const auto& [l, s] : sums)
      if (l != labels[i]) b = std::min(b, s / static_cast<double>(sizes[l]));
    const double m = std::max(a, b);
    if (m > 0.0) total += (b - a) / m;
  }
  return total / static_cast<double>(pts.size());
}

// Stochastic block model adjacency with 0/1 entries, symmetric, zero diagonal.
inline std::vector<std::vector<double>> planted_partition(std::size_t blocks, std::size_t per_block, double p_in,
                                                          double p_out, std::mt19937_64& rng,
                                                          std::vector<int>* truth = nullptr) {
  const std::size_t n = blocks * per_block;
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<std::vector<double>> a(n, std::vector<double>(n, 0.0));
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) {
      const double p = (i / per_block == j / per_block) ? p_in : p_out;
      if (u(rng) < p) a[i][j] = a[j][i] = 1.0;
    }
  if (truth) {
    truth->clear();
    for (std::size_t i = 0; i < n; ++i) truth->push_back(static_cast<int>(i / per_block));
  }
  return a;
}

}  // namespace bexrl::oracle
