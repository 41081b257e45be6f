#include <doctest.h>

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <set>

#include "../common/oracles.hpp"
#include "bexrl/seg/behavior_graph.hpp"
#include "bexrl/seg/jacobi.hpp"
#include "bexrl/seg/kmeans.hpp"
#include "bexrl/seg/labels.hpp"
#include "bexrl/seg/spectral.hpp"
#include "test_support.hpp"

using namespace bexrl;
using namespace bexrl::seg;
using ad::Tensor;

namespace {

vq::Codebook codebook_of(std::size_t n, std::size_t d, std::mt19937_64& rng) {
  return vq::Codebook(Tensor({n, d}, testing::uniform_vector(rng, n * d)));
}

std::vector<vq::TokenSequence> streams(const std::vector<std::vector<std::size_t>>& seqs) {
  std::vector<vq::TokenSequence> out;
  for (std::size_t i = 0; i < seqs.size(); ++i) out.push_back({i, seqs[i]});
  return out;
}

Tensor to_tensor(const std::vector<std::vector<double>>& m) {
  Tensor t({m.size(), m.size()});
  for (std::size_t i = 0; i < m.size(); ++i)
    for (std::size_t j = 0; j < m.size(); ++j) t.at(i, j) = m[i][j];
  return t;
}

Tensor random_symmetric(std::size_t n, std::mt19937_64& rng) {
  std::normal_distribution<double> g(0.0, 1.0);
  Tensor a({n, n});
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i; j < n; ++j) a.at(i, j) = a.at(j, i) = g(rng);
  return a;
}

Tensor random_similarity(std::size_t n, std::mt19937_64& rng, double density = 0.6) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Tensor s({n, n});
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j)
      if (u(rng) < density) s.at(i, j) = s.at(j, i) = u(rng);
  return s;
}

double reconstruction_error(const Tensor& a, const SymmetricEigen& e) {
  const std::size_t n = a.dim(0);
  double err = 0.0;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      double v = 0.0;
      for (std::size_t k = 0; k < n; ++k) v += e.eigenvectors.at(i, k) * e.eigenvalues[k] * e.eigenvectors.at(j, k);
      err += (v - a.at(i, j)) * (v - a.at(i, j));
    }
  return std::sqrt(err);
}

double orthonormality_error(const Tensor& v) {
  const std::size_t n = v.dim(0);
  double worst = 0.0;
  for (std::size_t a = 0; a < n; ++a)
    for (std::size_t b = 0; b < n; ++b) {
      double dot = 0.0;
      for (std::size_t i = 0; i < n; ++i) dot += v.at(i, a) * v.at(i, b);
      worst = std::max(worst, std::abs(dot - (a == b ? 1.0 : 0.0)));
    }
  return worst;
}

std::size_t count_components(const Tensor& s) {
  const std::size_t n = s.dim(0);
  std::vector<int> comp(n, -1);
  std::size_t count = 0;
  for (std::size_t start = 0; start < n; ++start) {
    if (comp[start] >= 0) continue;
    std::vector<std::size_t> stack{start};
    comp[start] = static_cast<int>(count);
    while (!stack.empty()) {
      const std::size_t i = stack.back();
      stack.pop_back();
      for (std::size_t j = 0; j < n; ++j)
        if (s.at(i, j) > 0.0 && comp[j] < 0) {
          comp[j] = static_cast<int>(count);
          stack.push_back(j);
        }
    }
    ++count;
  }
  return count;
}

}  // namespace

TEST_CASE("hand-counted three-token stream") {
  std::mt19937_64 rng(1);
  const auto cb = codebook_of(4, 2, rng);
  const BehaviorGraph g = build_graph(streams({{0, 1, 0, 1, 2}}), cb, 0.0);
  REQUIRE(g.nodes == std::vector<std::size_t>{0, 1, 2});
  CHECK(g.counts[0][1] == 2);
  CHECK(g.counts[1][0] == 1);
  CHECK(g.counts[1][2] == 1);
  CHECK(g.counts[2] == std::vector<long>{0, 0, 0});
  CHECK(g.transition.at(0, 0) == 0.0);
  CHECK(g.transition.at(0, 1) == 1.0);
  CHECK(g.transition.at(0, 2) == 0.0);
  CHECK(g.transition.at(1, 0) == 0.5);
  CHECK(g.transition.at(2, 1) == 0.0);
}

TEST_CASE("lambda endpoints isolate each term") {
  std::mt19937_64 rng(2);
  const auto cb = codebook_of(6, 3, rng);
  const auto seqs = streams({{0, 1, 1, 2, 5, 0, 2}, {5, 5, 1, 0}});
  const BehaviorGraph g0 = build_graph(seqs, cb, 0.0);
  CHECK(g0.weights == g0.transition);
  const BehaviorGraph g1 = build_graph(seqs, cb, 1.0);
  CHECK(g1.weights == g1.latent);
  for (std::size_t i = 0; i < g1.size(); ++i) CHECK(g1.latent.at(i, i) == 1.0);
}

TEST_CASE("identical code vectors have unit similarity") {
  const vq::Codebook cb(Tensor({3, 2}, std::vector<double>{1, 2, 1, 2, -3, 0}));
  const BehaviorGraph g = build_graph(streams({{0, 1, 2}}), cb, 1.0);
  CHECK(g.latent.at(0, 1) == 1.0);
  CHECK(g.latent.at(0, 2) < 1.0);
}

TEST_CASE("kernel bandwidth is the median pairwise squared distance") {
  const vq::Codebook cb(Tensor({4, 1}, std::vector<double>{0, 1, 3, 7}));
  const BehaviorGraph g = build_graph(streams({{0, 1, 2, 3}}), cb, 1.0);
  // squared distances: 1, 9, 49, 4, 36, 16 -> median of sorted {1,4,9,16,36,49} = 12.5
  CHECK(g.sigma_sq == 12.5);
  CHECK(g.latent.at(0, 2) == doctest::Approx(std::exp(-9.0 / 25.0)));
}

TEST_CASE("graph contract details") {
  std::mt19937_64 rng(3);
  const auto cb = codebook_of(8, 2, rng);
  SUBCASE("no edge crosses a trajectory boundary") {
    const BehaviorGraph g = build_graph(streams({{0, 0, 3}, {5, 5}}), cb, 0.0);
    CHECK(g.counts[g.node_index(3)][g.node_index(5)] == 0);
  }
  SUBCASE("tokens that never appear are not nodes") {
    const BehaviorGraph g = build_graph(streams({{7, 2, 7}}), cb, 0.5);
    CHECK(g.nodes == std::vector<std::size_t>{2, 7});
    CHECK(g.node_index(4) == g.size());
  }
  SUBCASE("errors") {
    CHECK_ERROR_KIND(build_graph(streams({{0, 1}}), cb, 1.5), ErrorKind::kInvalidLambda);
    CHECK_ERROR_KIND(build_graph(streams({{0, 1}}), cb, -0.1), ErrorKind::kInvalidLambda);
    CHECK_ERROR_KIND(build_graph(streams({{}}), cb, 0.5), ErrorKind::kEmptyTokens);
    CHECK_ERROR_KIND(build_graph({}, cb, 0.5), ErrorKind::kEmptyTokens);
    CHECK_ERROR_KIND(build_graph(streams({{0, 8}}), cb, 0.5), ErrorKind::kUnknownToken);
  }
}

TEST_CASE("random graphs keep nonnegative weights and a valid Laplacian") {
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> lam(0.0, 1.0);
  for (int trial = 0; trial < 40; ++trial) {
    const std::size_t n_codes = 3 + rng() % 10;
    const auto cb = codebook_of(n_codes, 1 + rng() % 4, rng);
    std::vector<std::vector<std::size_t>> seqs(1 + rng() % 4);
    for (auto& s : seqs) {
      s.resize(2 + rng() % 30);
      for (auto& t : s) t = rng() % n_codes;
    }
    const BehaviorGraph g = build_graph(streams(seqs), cb, lam(rng));
    for (double w : g.weights.values()) CHECK(w >= 0.0);
    if (g.size() < 2) continue;
    const SpectralDecomposition d = spectral_decompose(g);
    for (std::size_t i = 0; i < g.size(); ++i) {
      double row = 0.0;
      for (std::size_t j = 0; j < g.size(); ++j) {
        CHECK(d.similarity.at(i, j) == d.similarity.at(j, i));
        row += d.laplacian.at(i, j);
      }
      CHECK(std::abs(row) < 1e-10);
    }
    CHECK(d.eigenvalues.front() >= -1e-9);
    CHECK(orthonormality_error(d.eigenvectors) < 1e-8);
  }
}

TEST_CASE("two-node graph has eigenvalues 0 and 2") {
  const SpectralDecomposition d = decompose_similarity(Tensor({2, 2}, std::vector<double>{0, 1, 1, 0}));
  CHECK(d.eigenvalues[0] == doctest::Approx(0.0));
  CHECK(d.eigenvalues[1] == doctest::Approx(2.0));
}

TEST_CASE("connected graph has a constant null eigenvector") {
  std::mt19937_64 rng(5);
  const Tensor s = random_similarity(7, rng, 1.0);
  const SpectralDecomposition d = decompose_similarity(s);
  CHECK(std::abs(d.eigenvalues[0]) < 1e-10);
  const double expect = 1.0 / std::sqrt(7.0);
  for (std::size_t i = 0; i < 7; ++i) CHECK(std::abs(d.eigenvectors.at(i, 0)) == doctest::Approx(expect).epsilon(1e-9));
}

TEST_CASE("near-zero eigenvalue count equals the number of components") {
  std::mt19937_64 rng(6);
  for (int trial = 0; trial < 30; ++trial) {
    const Tensor s = random_similarity(3 + rng() % 9, rng, 0.25);
    const SpectralDecomposition d = decompose_similarity(s);
    const auto zeros = std::count_if(d.eigenvalues.begin(), d.eigenvalues.end(), [](double v) { return v < 1e-8; });
    CHECK(static_cast<std::size_t>(zeros) == count_components(s));
  }
}

TEST_CASE("Jacobi matches an independent dense eigensolver") {
  std::mt19937_64 rng(7);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t n = trial < 10 ? 8 : 12;
    const Tensor a = random_symmetric(n, rng);
    const SymmetricEigen e = jacobi_eigen(a);
    Eigen::MatrixXd m(n, n);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j) m(i, j) = a.at(i, j);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> ref(m);
    for (std::size_t k = 0; k < n; ++k) CHECK(e.eigenvalues[k] == doctest::Approx(ref.eigenvalues()(k)).epsilon(1e-10));
    CHECK(reconstruction_error(a, e) < 1e-8);
    CHECK(orthonormality_error(e.eigenvectors) < 1e-8);
    CHECK(std::is_sorted(e.eigenvalues.begin(), e.eigenvalues.end()));
  }
}

TEST_CASE("Jacobi sign convention and failure modes") {
  std::mt19937_64 rng(8);
  const SymmetricEigen e = jacobi_eigen(random_symmetric(6, rng));
  for (std::size_t k = 0; k < 6; ++k) {
    double big = 0.0;
    for (std::size_t i = 0; i < 6; ++i)
      if (std::abs(e.eigenvectors.at(i, k)) > std::abs(big)) big = e.eigenvectors.at(i, k);
    CHECK(big > 0.0);
  }
  CHECK_ERROR_KIND(jacobi_eigen(random_symmetric(6, rng), 1e-300, 1), ErrorKind::kConvergence);
  CHECK_ERROR_KIND(jacobi_eigen(Tensor({2, 3})), ErrorKind::kShape);
}

TEST_CASE("eigengap selection") {
  CHECK(select_k({0, 0, 0, 5, 6, 7}) == 3);
  CHECK(select_k({0, 1, 2, 3, 4}) == 2);
  CHECK(select_k({0, 1, 2, 3, 4}, 3) == 3);
  CHECK(select_k({0, 0.1, 0.2, 0.3, 9.0, 9.1}) == 4);
  CHECK(select_k({0, 0.1, 0.2, 0.35, 9.0, 9.1}, 2, 3) == 3);
  CHECK_ERROR_KIND(select_k({0, 1}), ErrorKind::kTooFewNodes);

  SUBCASE("block-diagonal similarity with four blocks") {
    std::mt19937_64 rng(9);
    std::uniform_real_distribution<double> u(0.5, 1.0);
    const std::size_t n = 4 * 4;
    Tensor s({n, n});
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = i + 1; j < n; ++j)
        if (i / 4 == j / 4) s.at(i, j) = s.at(j, i) = u(rng);
    CHECK(select_k(decompose_similarity(s).eigenvalues) == 4);
  }
}

TEST_CASE("spectral clustering recovery") {
  SUBCASE("two disconnected cliques") {
    Tensor s({6, 6});
    for (std::size_t i = 0; i < 6; ++i)
      for (std::size_t j = 0; j < 6; ++j)
        if (i != j && (i < 3) == (j < 3)) s.at(i, j) = 1.0;
    const auto labels = spectral_cluster(decompose_similarity(s), 2, 0);
    CHECK(labels == std::vector<int>{0, 0, 0, 1, 1, 1});
  }
  SUBCASE("planted partitions") {
    double total = 0.0;
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
      std::mt19937_64 rng(seed);
      std::vector<int> truth;
      const Tensor s = to_tensor(oracle::planted_partition(3, 8, 0.9, 0.05, rng, &truth));
      const auto d = decompose_similarity(s);
      total += oracle::pair_count_ari(spectral_cluster(d, 3, seed), truth);
    }
    CHECK(total / 20.0 >= 0.9);
  }
  SUBCASE("node reordering permutes the partition") {
    std::mt19937_64 rng(10);
    const auto a = oracle::planted_partition(3, 5, 0.8, 0.1, rng);
    std::vector<std::size_t> perm(a.size());
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), rng);
    std::vector<std::vector<double>> b(a.size(), std::vector<double>(a.size()));
    for (std::size_t i = 0; i < a.size(); ++i)
      for (std::size_t j = 0; j < a.size(); ++j) b[i][j] = a[perm[i]][perm[j]];
    const auto la = spectral_cluster(decompose_similarity(to_tensor(a)), 3, 1);
    const auto lb = spectral_cluster(decompose_similarity(to_tensor(b)), 3, 1);
    std::vector<int> la_permuted(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) la_permuted[i] = la[perm[i]];
    CHECK(oracle::pair_count_ari(la_permuted, lb) == doctest::Approx(1.0));
  }
  SUBCASE("identical embedding rows are degenerate") {
    SpectralDecomposition d;
    d.eigenvalues = {0.0, 1.0, 1.0};
    d.eigenvectors = Tensor({3, 3}, 0.5);
    CHECK_ERROR_KIND(spectral_cluster(d, 2, 0), ErrorKind::kDegenerateEmbedding);
  }
  SUBCASE("k bounds") {
    const auto d = decompose_similarity(Tensor({2, 2}, std::vector<double>{0, 1, 1, 0}));
    CHECK_ERROR_KIND(spectral_cluster(d, 1, 0), ErrorKind::kInvalidConfig);
    CHECK_ERROR_KIND(spectral_cluster(d, 3, 0), ErrorKind::kTooFewNodes);
  }
}

TEST_CASE("k-means finds the optimal split of small point sets") {
  std::mt19937_64 rng(11);
  std::normal_distribution<double> g(0.0, 1.0);
  for (int trial = 0; trial < 20; ++trial) {
    Points pts(7, std::vector<double>(2));
    for (auto& p : pts)
      for (auto& v : p) v = g(rng);
    double best = std::numeric_limits<double>::infinity();
    for (unsigned mask = 1; mask + 1 < (1u << pts.size()); ++mask) {
      double inertia = 0.0;
      for (int side = 0; side < 2; ++side) {
        std::vector<double> c(2, 0.0);
        int count = 0;
        for (std::size_t i = 0; i < pts.size(); ++i)
          if (((mask >> i) & 1u) == static_cast<unsigned>(side)) {
            c[0] += pts[i][0];
            c[1] += pts[i][1];
            ++count;
          }
        c[0] /= count;
        c[1] /= count;
        for (std::size_t i = 0; i < pts.size(); ++i)
          if (((mask >> i) & 1u) == static_cast<unsigned>(side))
            inertia += (pts[i][0] - c[0]) * (pts[i][0] - c[0]) + (pts[i][1] - c[1]) * (pts[i][1] - c[1]);
      }
      best = std::min(best, inertia);
    }
    const KMeansResult r = kmeans(pts, {2, static_cast<std::uint64_t>(trial), 50, 300});
    CHECK(r.inertia == doctest::Approx(best).epsilon(1e-9));
    CHECK(r.labels.front() == 0);
  }
}

TEST_CASE("k-means determinism and errors") {
  std::mt19937_64 rng(12);
  Points pts(30, std::vector<double>(3));
  for (auto& p : pts)
    for (auto& v : p) v = testing::uniform_vector(rng, 1)[0];
  const auto a = kmeans(pts, {4, 9, 50, 300});
  const auto b = kmeans(pts, {4, 9, 50, 300});
  CHECK(a.labels == b.labels);
  CHECK(a.inertia == b.inertia);
  CHECK(a.best_restart == b.best_restart);
  CHECK(std::set<int>(a.labels.begin(), a.labels.end()).size() == 4);
  CHECK_ERROR_KIND(kmeans(pts, {0, 0, 50, 300}), ErrorKind::kInvalidConfig);
  CHECK_ERROR_KIND(kmeans(Points(2, {0.0}), {3, 0, 50, 300}), ErrorKind::kInvalidConfig);
  CHECK(canonical_labels({2, 2, 0, 1, 0}) == std::vector<int>{0, 0, 1, 2, 1});
}

TEST_CASE("timestep labels come straight from the token map") {
  const std::map<std::size_t, int> m{{3, 1}, {4, 0}, {9, 2}};
  CHECK(label_timesteps(streams({{3, 3, 3}}), m) == EpisodeLabels{{1, 1, 1}});
  CHECK(label_timesteps(streams({{9, 4, 3}, {4}}), m) == EpisodeLabels{{2, 0, 1}, {0}});
  CHECK_ERROR_KIND(label_timesteps(streams({{3, 5}}), m), ErrorKind::kUnknownToken);
}

TEST_CASE("outlier smoothing") {
  CHECK(smooth_sequence({0, 0, 1, 0, 0}, 3) == std::vector<int>{0, 0, 0, 0, 0});
  CHECK(smooth_sequence({0, 0, 1, 1, 1}, 3) == std::vector<int>{0, 0, 1, 1, 1});
  CHECK(smooth_sequence({2, 2, 2, 2}, 5) == std::vector<int>{2, 2, 2, 2});
  // Every decision reads the original labels, so alternation is not cascaded.
  CHECK(smooth_sequence({0, 1, 0, 1, 0}, 3) == std::vector<int>{0, 0, 1, 0, 0});
  // Window-5 tie between two labels keeps the original.
  CHECK(smooth_sequence({0, 0, 2, 1, 1}, 5) == std::vector<int>{0, 0, 2, 1, 1});
  CHECK_ERROR_KIND(smooth_sequence({0, 1}, 4), ErrorKind::kInvalidWindow);
  CHECK_ERROR_KIND(smooth_sequence({0, 1}, 1), ErrorKind::kInvalidWindow);
  CHECK(smooth_labels({{0, 0, 1, 0, 0}, {}}, 3) == EpisodeLabels{{0, 0, 0, 0, 0}, {}});
}

TEST_CASE("smoothing only reuses labels from the centered window") {
  std::mt19937_64 rng(13);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<int> seq(1 + rng() % 25);
    for (auto& v : seq) v = static_cast<int>(rng() % 4);
    const std::size_t window = 3 + 2 * (rng() % 3);
    const auto out = smooth_sequence(seq, window);
    REQUIRE(out.size() == seq.size());
    const std::size_t half = window / 2;
    for (std::size_t t = 0; t < seq.size(); ++t) {
      const std::size_t lo = t >= half ? t - half : 0;
      const std::size_t hi = std::min(seq.size(), t + half + 1);
      CHECK(std::find(seq.begin() + lo, seq.begin() + hi, out[t]) != seq.begin() + hi);
    }
  }
}

TEST_CASE("build, decompose, select, cluster and label are bit-deterministic") {
  auto run = [] {
    std::mt19937_64 rng(14);
    const auto cb = codebook_of(10, 4, rng);
    std::vector<std::vector<std::size_t>> seqs(5);
    for (auto& s : seqs) {
      s.resize(40);
      for (auto& t : s) t = rng() % 10;
    }
    const auto tokens = streams(seqs);
    const BehaviorGraph g = build_graph(tokens, cb, 0.5);
    const SpectralDecomposition d = spectral_decompose(g);
    const std::size_t k = select_k(d.eigenvalues);
    const auto labels = spectral_cluster(d, k, 3);
    std::map<std::size_t, int> m;
    for (std::size_t i = 0; i < g.size(); ++i) m[g.nodes[i]] = labels[i];
    return std::make_pair(d.eigenvalues, smooth_labels(label_timesteps(tokens, m)));
  };
  CHECK(run() == run());
}
