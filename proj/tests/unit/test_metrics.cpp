#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "../common/oracles.hpp"
#include "bexrl/attr/bc_model.hpp"
#include "bexrl/data/generators.hpp"
#include "bexrl/metrics/baselines.hpp"
#include "bexrl/metrics/cluster_metrics.hpp"
#include "bexrl/metrics/fidelity.hpp"
#include "bexrl/metrics/report.hpp"
#include "test_support.hpp"

using namespace bexrl;
using namespace bexrl::metrics;
using ad::Tensor;

namespace {

seg::Points blob(std::mt19937_64& rng, std::size_t n, std::vector<double> center, double spread) {
  std::normal_distribution<double> g(0.0, spread);
  seg::Points out(n, center);
  for (auto& p : out)
    for (auto& v : p) v += g(rng);
  return out;
}

void append(seg::Points& pts, std::vector<int>& labels, const seg::Points& more, int label) {
  pts.insert(pts.end(), more.begin(), more.end());
  labels.insert(labels.end(), more.size(), label);
}

// One 1-D state per step; the action flips sign with the state.
data::Dataset two_regime_dataset(std::size_t episodes, std::size_t len, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  data::Dataset ds;
  ds.obs_spec = data::ObservationSpec::vector(1);
  ds.act_spec = data::ActionSpec::continuous(1);
  ds.name = "toy";
  for (std::size_t e = 0; e < episodes; ++e) {
    data::Trajectory tr;
    std::vector<int> modes;
    for (std::size_t t = 0; t < len; ++t) {
      const double x = u(rng);
      tr.observations.push_back({x});
      tr.actions.push_back({x < 0.0 ? 0.8 : -0.8});
      modes.push_back(x < 0.0 ? 0 : 1);
    }
    tr.observations.push_back({u(rng)});
    tr.mode_labels = modes;
    ds.trajectories.push_back(std::move(tr));
  }
  return ds;
}

}  // namespace

TEST_CASE("silhouette agrees with the brute-force definition") {
  std::mt19937_64 rng(1);
  std::normal_distribution<double> g(0.0, 1.0);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t n = 4 + rng() % 30;
    const std::size_t k = 2 + rng() % 3;
    seg::Points pts(n, std::vector<double>(1 + rng() % 4));
    for (auto& p : pts)
      for (auto& v : p) v = g(rng);
    std::vector<int> labels(n);
    for (std::size_t i = 0; i < n; ++i) labels[i] = static_cast<int>(i < k ? i : rng() % k);
    const double s = silhouette(pts, labels);
    CHECK(s == doctest::Approx(oracle::brute_silhouette(pts, labels)).epsilon(1e-12));
    CHECK(s >= -1.0);
    CHECK(s <= 1.0);
  }
}

TEST_CASE("silhouette examples") {
  std::mt19937_64 rng(2);
  SUBCASE("two tight separated blobs") {
    seg::Points pts;
    std::vector<int> labels;
    append(pts, labels, blob(rng, 20, {0, 0}, 0.1), 0);
    append(pts, labels, blob(rng, 20, {5, 5}, 0.1), 1);
    CHECK(silhouette(pts, labels) > 0.8);
  }
  SUBCASE("identical points score zero") {
    CHECK(silhouette(seg::Points(6, {1.0, 1.0}), {0, 0, 0, 1, 1, 1}) == 0.0);
  }
  SUBCASE("random labels on one blob") {
    double total = 0.0;
    for (int rep = 0; rep < 20; ++rep) {
      const auto pts = blob(rng, 200, {0, 0}, 1.0);
      std::vector<int> labels(pts.size());
      for (auto& l : labels) l = static_cast<int>(rng() % 3);
      total += silhouette(pts, labels);
    }
    CHECK(std::abs(total / 20.0) < 0.1);
  }
  SUBCASE("errors") {
    CHECK_ERROR_KIND(silhouette(seg::Points(3, {0.0}), {1, 1, 1}), ErrorKind::kSingleCluster);
    CHECK_ERROR_KIND(silhouette(seg::Points(3, {0.0}), {0, 1}), ErrorKind::kLengthMismatch);
  }
}

TEST_CASE("Davies-Bouldin examples") {
  SUBCASE("point masses have zero spread") {
    CHECK(davies_bouldin({{0, 0}, {0, 0}, {3, 4}, {3, 4}}, {0, 0, 1, 1}) == 0.0);
  }
  SUBCASE("symmetric pair of blobs matches (s0 + s1) / d01") {
    // Each blob: two points at distance 1 from its centroid, centroids 10 apart.
    const seg::Points pts{{-1, 0}, {1, 0}, {10, -1}, {10, 1}};
    CHECK(davies_bouldin(pts, {0, 0, 1, 1}) == doctest::Approx((1.0 + 1.0) / 10.0));
  }
  SUBCASE("three clusters against a hand computation") {
    const seg::Points pts{{0, 0}, {2, 0}, {10, 0}, {10, 4}, {0, 20}, {0, 26}};
    // spreads 1, 2, 3; centroids (1,0), (10,2), (0,23)
    const double d01 = std::hypot(9, 2), d02 = std::hypot(1, 23), d12 = std::hypot(10, 21);
    const double r0 = std::max(3 / d01, 4 / d02), r1 = std::max(3 / d01, 5 / d12), r2 = std::max(4 / d02, 5 / d12);
    CHECK(davies_bouldin(pts, {0, 0, 1, 1, 2, 2}) == doctest::Approx((r0 + r1 + r2) / 3.0).epsilon(1e-12));
  }
  SUBCASE("tightening both blobs strictly decreases the index") {
    std::mt19937_64 rng(3);
    const auto a = blob(rng, 15, {0, 0, 0}, 1.0);
    const auto b = blob(rng, 15, {4, 0, 1}, 1.0);
    auto shrink = [](seg::Points p, double f) {
      std::vector<double> c(p.front().size(), 0.0);
      for (const auto& q : p)
        for (std::size_t i = 0; i < c.size(); ++i) c[i] += q[i] / static_cast<double>(p.size());
      for (auto& q : p)
        for (std::size_t i = 0; i < c.size(); ++i) q[i] = c[i] + f * (q[i] - c[i]);
      return p;
    };
    double prev = std::numeric_limits<double>::infinity();
    for (double f : {1.0, 0.7, 0.4, 0.1}) {
      seg::Points pts;
      std::vector<int> labels;
      append(pts, labels, shrink(a, f), 0);
      append(pts, labels, shrink(b, f), 1);
      const double db = davies_bouldin(pts, labels);
      CHECK(db >= 0.0);
      CHECK(db < prev);
      prev = db;
    }
  }
  SUBCASE("errors") {
    CHECK_ERROR_KIND(davies_bouldin({{0.0}, {1.0}}, {0, 0}), ErrorKind::kSingleCluster);
    CHECK_ERROR_KIND(davies_bouldin({{-1.0}, {1.0}, {-2.0}, {2.0}}, {0, 0, 1, 1}), ErrorKind::kCoincidentCentroids);
  }
}

TEST_CASE("adjusted Rand index agrees with pair counting") {
  CHECK(adjusted_rand({0, 0, 1, 1, 2, 2}, {0, 0, 1, 1, 2, 2}) == doctest::Approx(1.0));
  CHECK(adjusted_rand({0, 0, 1, 1, 2, 2}, {2, 2, 0, 0, 1, 1}) == doctest::Approx(1.0));
  CHECK(adjusted_rand({0, 0, 0, 1, 1, 1}, {0, 0, 1, 1, 2, 2}) ==
        doctest::Approx(oracle::pair_count_ari({0, 0, 0, 1, 1, 1}, {0, 0, 1, 1, 2, 2})).epsilon(1e-12));
  CHECK(adjusted_rand({4, 4, 4}, {1, 1, 1}) == 1.0);
  CHECK_ERROR_KIND(adjusted_rand({0, 1}, {0}), ErrorKind::kLengthMismatch);

  std::mt19937_64 rng(4);
  for (int trial = 0; trial < 300; ++trial) {
    const std::size_t n = 2 + rng() % 40;
    std::vector<int> a(n), b(n);
    const int ka = 1 + static_cast<int>(rng() % 5), kb = 1 + static_cast<int>(rng() % 5);
    for (auto& v : a) v = static_cast<int>(rng() % ka);
    for (auto& v : b) v = static_cast<int>(rng() % kb);
    const double ari = adjusted_rand(a, b);
    CHECK(ari == doctest::Approx(oracle::pair_count_ari(a, b)).epsilon(1e-9));
    CHECK(adjusted_rand(a, a) == doctest::Approx(1.0));
    CHECK(adjusted_rand(a, b) == adjusted_rand(b, a));
  }
}

TEST_CASE("baselines") {
  data::PointMassConfig pm;
  pm.seed = 5;
  pm.num_episodes = 6;
  pm.episode_len = 40;
  const auto ds = data::generate_pointmass(pm);

  SUBCASE("raw pairs") {
    const auto a = raw_pair_baseline(ds, 3, 7);
    const auto b = raw_pair_baseline(ds, 3, 7);
    CHECK(a.silhouette == b.silhouette);
    CHECK(a.davies_bouldin == b.davies_bouldin);
    CHECK(a.labels == b.labels);
    CHECK(a.labels.size() == ds.total_steps());
    CHECK_ERROR_KIND(raw_pair_baseline(ds, 1, 0), ErrorKind::kSingleCluster);
  }
  SUBCASE("k-means on latents") {
    const vq::Codebook cb(Tensor({5, 2}, std::vector<double>{0, 0, 0.1, 0, 5, 5, 5.1, 5, 9, 9}));
    const std::vector<vq::TokenSequence> tokens{{0, {0, 1, 2}}, {1, {3, 3, 0}}};
    const auto s = kmeans_latent_baseline(cb, tokens, 2, 0);
    CHECK(s.labels == std::vector<int>{0, 0, 1, 1});
    CHECK(!s.degenerate);
    CHECK(s.silhouette > 0.9);
    const auto singletons = kmeans_latent_baseline(cb, tokens, 4, 0);
    CHECK(singletons.degenerate);
    CHECK(singletons.davies_bouldin == 0.0);
    CHECK_ERROR_KIND(kmeans_latent_baseline(cb, tokens, 5, 0), ErrorKind::kTooFewNodes);
    CHECK_ERROR_KIND(kmeans_latent_baseline(cb, tokens, 1, 0), ErrorKind::kSingleCluster);
    std::vector<std::size_t> ids;
    CHECK(appearing_codes(cb, tokens, &ids).size() == 4);
    CHECK(ids == std::vector<std::size_t>{0, 1, 2, 3});
  }
}

TEST_CASE("average fidelity") {
  const auto ds = two_regime_dataset(12, 20, 6);
  attr::BcConfig cfg;
  cfg.hidden = 32;
  cfg.num_epochs = 60;
  cfg.batch_size = 16;
  cfg.learning_rate = 3e-3;
  const auto pairs = attr::all_pairs(ds);
  const auto policy = attr::train_bc(pairs, ds.obs_spec, ds.act_spec, cfg, "policy");

  seg::EpisodeLabels labels;
  for (const auto& tr : ds.trajectories) labels.push_back(*tr.mode_labels);
  const attr::SampleSpec spec{12, 10, 3};

  SUBCASE("models identical to the policy give zero on both sides") {
    std::vector<attr::BcModel> clusters;
    clusters.push_back(attr::train_bc(pairs, ds.obs_spec, ds.act_spec, cfg, "policy"));
    clusters.push_back(attr::train_bc(pairs, ds.obs_spec, ds.act_spec, cfg, "policy"));
    const auto r = average_fidelity(policy, clusters, labels, ds, spec);
    CHECK(r.attributed == 0.0);
    CHECK(r.random == 0.0);
    CHECK(r.samples == 120);
  }
  SUBCASE("per-regime models beat shuffled labels") {
    std::vector<attr::StateAction> seg0, seg1;
    for (const auto& p : pairs) (p.observation[0] < 0.0 ? seg0 : seg1).push_back(p);
    std::vector<attr::BcModel> clusters;
    clusters.push_back(attr::train_bc(seg0, ds.obs_spec, ds.act_spec, cfg, "cluster_0"));
    clusters.push_back(attr::train_bc(seg1, ds.obs_spec, ds.act_spec, cfg, "cluster_1"));
    const auto r = average_fidelity(policy, clusters, labels, ds, spec);
    CHECK(r.attributed < 0.05);
    CHECK(r.random > 10.0 * r.attributed);
    const auto again = average_fidelity(policy, clusters, labels, ds, spec);
    CHECK(again.attributed == r.attributed);
    CHECK(again.random == r.random);
  }
  SUBCASE("label coverage errors") {
    std::vector<attr::BcModel> clusters;
    clusters.push_back(attr::train_bc(pairs, ds.obs_spec, ds.act_spec, cfg, "policy"));
    auto short_labels = labels;
    short_labels.pop_back();
    CHECK_ERROR_KIND(average_fidelity(policy, clusters, short_labels, ds, spec), ErrorKind::kLengthMismatch);
    CHECK_ERROR_KIND(average_fidelity(policy, clusters, labels, ds, spec), ErrorKind::kSpecMismatch);
    CHECK_ERROR_KIND(average_fidelity(policy, {}, labels, ds, spec), ErrorKind::kSpecMismatch);
  }
}

TEST_CASE("report serialization round-trips every number") {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> u(-5.0, 5.0);
  for (int trial = 0; trial < 50; ++trial) {
    const double v = u(rng) * std::pow(10.0, static_cast<int>(rng() % 20) - 10);
    CHECK(std::stod(format_number(v)) == v);
  }
  MetricsReport r;
  r.afs_attributed = 0.1;
  r.afs_random = 1.0 / 3.0;
  r.silhouette = 0.75;
  r.davies_bouldin = 0.4;
  r.occupancy = 0.6875;
  r.normalized_recon = 0.0061;
  r.ari_vs_planted = 1.0;
  r.afs_samples = 200;
  r.config = {{"lambda", 0.5}};
  const auto back = report_from_json(report_to_json(r));
  CHECK(report_to_json(back).dump() == report_to_json(r).dump());
  CHECK(back.afs_random == r.afs_random);
  CHECK(report_csv_header().find("silhouette") != std::string::npos);
  CHECK_ERROR_KIND(report_from_json(nlohmann::json::array()), ErrorKind::kParse);
}
