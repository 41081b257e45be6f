#include "bexrl/metrics/cluster_metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>

#include "bexrl/util/error.hpp"

namespace bexrl::metrics {

namespace {

double distance(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
  return std::sqrt(s);
}

// Dense cluster ids 0..m-1 in ascending label order.
std::vector<std::size_t> dense_ids(const std::vector<int>& labels, std::size_t& count) {
  std::map<int, std::size_t> ids;
  for (int l : labels) ids.emplace(l, 0);
  std::size_t next = 0;
  for (auto& [l, id] : ids) id = next++;
  count = next;
  std::vector<std::size_t> out;
  out.reserve(labels.size());
  for (int l : labels) out.push_back(ids[l]);
  return out;
}

void check_inputs(const seg::Points& points, const std::vector<int>& labels, std::size_t clusters) {
  if (points.size() != labels.size()) {
    fail(ErrorKind::kLengthMismatch, std::to_string(points.size()) + " points but " +
                                         std::to_string(labels.size()) + " labels");
  }
  if (clusters < 2) fail(ErrorKind::kSingleCluster, "cluster quality needs at least two clusters");
  for (const auto& p : points) {
    if (p.size() != points.front().size()) fail(ErrorKind::kDimMismatch, "points have different dimensions");
  }
}

double choose2(double n) { return n * (n - 1.0) / 2.0; }

}  // namespace

double silhouette(const seg::Points& points, const std::vector<int>& labels) {
  std::size_t m = 0;
  const auto ids = dense_ids(labels, m);
  check_inputs(points, labels, m);
  const std::size_t n = points.size();
  std::vector<std::size_t> sizes(m, 0);
  for (auto id : ids) ++sizes[id];

  double total = 0.0;
  std::vector<double> sums(m);
  for (std::size_t i = 0; i < n; ++i) {
    if (sizes[ids[i]] == 1) continue;
    std::fill(sums.begin(), sums.end(), 0.0);
    for (std::size_t j = 0; j < n; ++j) {
      if (j != i) sums[ids[j]] += distance(points[i], points[j]);
    }
    const double a = sums[ids[i]] / static_cast<double>(sizes[ids[i]] - 1);
    double b = std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < m; ++c) {
      if (c != ids[i]) b = std::min(b, sums[c] / static_cast<double>(sizes[c]));
    }
    const double denom = std::max(a, b);
    if (denom > 0.0) total += (b - a) / denom;
  }
  return total / static_cast<double>(n);
}

double davies_bouldin(const seg::Points& points, const std::vector<int>& labels) {
  std::size_t m = 0;
  const auto ids = dense_ids(labels, m);
  check_inputs(points, labels, m);
  const std::size_t dim = points.front().size();
  seg::Points centroids(m, std::vector<double>(dim, 0.0));
  std::vector<std::size_t> sizes(m, 0);
  for (std::size_t i = 0; i < points.size(); ++i) {
    ++sizes[ids[i]];
    for (std::size_t d = 0; d < dim; ++d) centroids[ids[i]][d] += points[i][d];
  }
  for (std::size_t c = 0; c < m; ++c)
    for (auto& v : centroids[c]) v /= static_cast<double>(sizes[c]);
  std::vector<double> spread(m, 0.0);
  for (std::size_t i = 0; i < points.size(); ++i) spread[ids[i]] += distance(points[i], centroids[ids[i]]);
  for (std::size_t c = 0; c < m; ++c) spread[c] /= static_cast<double>(sizes[c]);

  double total = 0.0;
  for (std::size_t i = 0; i < m; ++i) {
    double worst = 0.0;
    for (std::size_t j = 0; j < m; ++j) {
      if (i == j) continue;
      const double d = distance(centroids[i], centroids[j]);
      if (d == 0.0) {
        fail(ErrorKind::kCoincidentCentroids,
             "clusters " + std::to_string(i) + " and " + std::to_string(j) + " share a centroid");
      }
      worst = std::max(worst, (spread[i] + spread[j]) / d);
    }
    total += worst;
  }
  return total / static_cast<double>(m);
}

double adjusted_rand(const std::vector<int>& a, const std::vector<int>& b) {
  if (a.size() != b.size()) {
    fail(ErrorKind::kLengthMismatch, "labelings have lengths " + std::to_string(a.size()) + " and " +
                                         std::to_string(b.size()));
  }
  std::size_t ma = 0, mb = 0;
  const auto ia = dense_ids(a, ma);
  const auto ib = dense_ids(b, mb);
  std::vector<std::vector<double>> table(ma, std::vector<double>(mb, 0.0));
  std::vector<double> rows(ma, 0.0), cols(mb, 0.0);
  for (std::size_t i = 0; i < a.size(); ++i) {
    table[ia[i]][ib[i]] += 1.0;
    rows[ia[i]] += 1.0;
    cols[ib[i]] += 1.0;
  }
  double index = 0.0, sum_rows = 0.0, sum_cols = 0.0;
  for (const auto& r : table)
    for (double v : r) index += choose2(v);
  for (double v : rows) sum_rows += choose2(v);
  for (double v : cols) sum_cols += choose2(v);
  const double pairs = choose2(static_cast<double>(a.size()));
  if (pairs == 0.0) return 1.0;
  const double expected = sum_rows * sum_cols / pairs;
  const double max_index = 0.5 * (sum_rows + sum_cols);
  if (max_index == expected) return 1.0;
  return (index - expected) / (max_index - expected);
}

}  // namespace bexrl::metrics
