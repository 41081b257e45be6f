#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <limits>
#include <map>
#include <random>

#include "bexrl/data/dataset.hpp"
#include "bexrl/data/generators.hpp"
#include "test_support.hpp"

using namespace bexrl;
using namespace bexrl::data;

namespace {

Dataset random_dataset(std::mt19937_64& rng) {
  std::uniform_int_distribution<int> coin(0, 1), small(1, 4), len(2, 7), eps(1, 4);
  Dataset ds;
  ds.name = "random-" + std::to_string(rng() % 1000);
  if (coin(rng)) {
    ds.obs_spec = ObservationSpec::vector(static_cast<std::size_t>(small(rng)));
  } else {
    ds.obs_spec = ObservationSpec::image(static_cast<std::size_t>(small(rng)), static_cast<std::size_t>(small(rng)),
                                         coin(rng) ? 1 : 3);
  }
  const bool discrete = coin(rng);
  ds.act_spec = discrete ? ActionSpec::discrete(static_cast<std::size_t>(small(rng) + 1))
                         : ActionSpec::continuous(static_cast<std::size_t>(small(rng)));
  std::normal_distribution<double> gauss(0.0, 1e3);
  const int n_eps = eps(rng);
  for (int e = 0; e < n_eps; ++e) {
    Trajectory t;
    const int n = len(rng);
    for (int i = 0; i < n; ++i) {
      Observation o(ds.obs_spec.flat_size());
      for (auto& v : o) v = gauss(rng) * std::pow(10.0, static_cast<double>(static_cast<int>(rng() % 20) - 10));
      t.observations.push_back(o);
      if (discrete) {
        t.actions.push_back({static_cast<double>(rng() % ds.act_spec.num_classes)});
      } else {
        Action a(ds.act_spec.dim);
        for (auto& v : a) v = gauss(rng);
        t.actions.push_back(a);
      }
    }
    if (coin(rng)) {
      std::vector<int> labels;
      for (int i = 0; i < n; ++i) labels.push_back(static_cast<int>(rng() % 3));
      t.mode_labels = labels;
    }
    ds.trajectories.push_back(t);
  }
  return ds;
}

const char* kHeader = R"({"version":1,"obs_spec":{"kind":"vector","dim":2},"act_spec":{"kind":"continuous","dim":1},"name":"toy"})";

}  // namespace

TEST_CASE("three-step episode loads as one trajectory") {
  const std::string text = std::string(kHeader) + "\n" +
                           R"({"observations":[[0,1],[1,2],[2,3]],"actions":[[0.5],[-0.5],[1]]})" + "\n";
  const Dataset ds = parse_dataset(text);
  REQUIRE(ds.trajectories.size() == 1);
  CHECK(ds.trajectories[0].size() == 3);
  CHECK(ds.trajectories[0].observations[2] == std::vector<double>{2, 3});
  CHECK_FALSE(ds.trajectories[0].mode_labels.has_value());
}

TEST_CASE("episode with more observations than actions is a spec mismatch") {
  const std::string text = std::string(kHeader) + "\n" +
                           R"({"observations":[[0,1],[1,2],[2,3],[3,4]],"actions":[[0.5],[-0.5],[1]]})" + "\n";
  CHECK_ERROR_KIND(parse_dataset(text), ErrorKind::kSpecMismatch);
}

TEST_CASE("dataset parse errors") {
  SUBCASE("malformed line reports its line number") {
    const std::string text = std::string(kHeader) + "\n{\"observations\": [[0,1]\n";
    try {
      parse_dataset(text);
      FAIL("expected a parse error");
    } catch (const Error& e) {
      CHECK(e.kind() == ErrorKind::kParse);
      CHECK(std::string(e.what()).find("line 2") != std::string::npos);
    }
  }
  SUBCASE("header only is empty") { CHECK_ERROR_KIND(parse_dataset(std::string(kHeader) + "\n"), ErrorKind::kEmptyDataset); }
  SUBCASE("wrong observation width") {
    const std::string text = std::string(kHeader) + "\n" + R"({"observations":[[0],[1]],"actions":[[0],[1]]})" + "\n";
    CHECK_ERROR_KIND(parse_dataset(text), ErrorKind::kSpecMismatch);
  }
  SUBCASE("single-step episode") {
    const std::string text = std::string(kHeader) + "\n" + R"({"observations":[[0,1]],"actions":[[0]]})" + "\n";
    CHECK_ERROR_KIND(parse_dataset(text), ErrorKind::kSpecMismatch);
  }
  SUBCASE("mode labels of the wrong length") {
    const std::string text = std::string(kHeader) + "\n" +
                             R"({"observations":[[0,1],[1,1]],"actions":[[0],[1]],"mode_labels":[0]})" + "\n";
    CHECK_ERROR_KIND(parse_dataset(text), ErrorKind::kSpecMismatch);
  }
  SUBCASE("discrete class out of range") {
    const std::string text =
        R"({"version":1,"obs_spec":{"kind":"vector","dim":1},"act_spec":{"kind":"discrete","num_classes":4},"name":"d"})"
        "\n"
        R"({"observations":[[0],[1]],"actions":[0,4]})"
        "\n";
    CHECK_ERROR_KIND(parse_dataset(text), ErrorKind::kSpecMismatch);
  }
  SUBCASE("unsupported version") {
    CHECK_ERROR_KIND(parse_dataset(R"({"version":2,"obs_spec":{},"act_spec":{},"name":""})"), ErrorKind::kParse);
  }
}

TEST_CASE("spec invariants") {
  CHECK_ERROR_KIND(ObservationSpec::vector(0), ErrorKind::kInvalidConfig);
  CHECK_ERROR_KIND(ObservationSpec::image(4, 4, 2), ErrorKind::kInvalidConfig);
  CHECK_ERROR_KIND(ActionSpec::discrete(1), ErrorKind::kInvalidConfig);
  CHECK_ERROR_KIND(ActionSpec::continuous(0), ErrorKind::kInvalidConfig);
  CHECK(ObservationSpec::image(5, 6, 3).flat_size() == 90);
}

TEST_CASE("serialize/parse round trip over random datasets") {
  std::mt19937_64 rng(2024);
  for (int i = 0; i < 100; ++i) {
    const Dataset ds = random_dataset(rng);
    const std::string text = serialize_dataset(ds);
    const Dataset back = parse_dataset(text);
    REQUIRE(back == ds);
    CHECK(serialize_dataset(back) == text);
  }
}

TEST_CASE("save and load through the filesystem") {
  const auto dir = std::filesystem::temp_directory_path() / "bexrl_test_data";
  std::filesystem::create_directories(dir);
  SUBCASE("gridlava") {
    const Dataset ds = generate_gridlava({5, 6, 8, false, 0.15});
    save_dataset(ds, dir / "g.jsonl");
    CHECK(load_dataset(dir / "g.jsonl") == ds);
  }
  SUBCASE("pointmass with mode labels") {
    const Dataset ds = generate_pointmass({9, 4, 40});
    save_dataset(ds, dir / "p.jsonl");
    const Dataset back = load_dataset(dir / "p.jsonl");
    CHECK(back == ds);
    CHECK(back.trajectories[0].mode_labels.has_value());
  }
  SUBCASE("empty path") { CHECK_ERROR_KIND(save_dataset(generate_pointmass({1, 1, 20}), ""), ErrorKind::kIo); }
  SUBCASE("missing file") { CHECK_ERROR_KIND(load_dataset(dir / "nope.jsonl"), ErrorKind::kIo); }
  std::filesystem::remove_all(dir);
}

TEST_CASE("gridlava generator contract") {
  const Dataset one = generate_gridlava({7, 1, 8, false, 0.15});
  REQUIRE(one.trajectories.size() == 1);
  CHECK(one.act_spec == ActionSpec::discrete(4));
  CHECK(one.obs_spec == ObservationSpec::vector(8));
  for (const auto& a : one.trajectories[0].actions) CHECK(action_class(a) < 4);
  CHECK(one.trajectories[0].mode_labels.has_value());

  CHECK(serialize_dataset(generate_gridlava({7, 3, 8, false, 0.15})) ==
        serialize_dataset(generate_gridlava({7, 3, 8, false, 0.15})));
  CHECK(serialize_dataset(generate_gridlava({7, 3, 8, false, 0.15})) !=
        serialize_dataset(generate_gridlava({8, 3, 8, false, 0.15})));

  CHECK_ERROR_KIND(generate_gridlava({1, 0, 8, false, 0.15}), ErrorKind::kInvalidConfig);
  CHECK_ERROR_KIND(generate_gridlava({1, 1, 5, false, 0.15}), ErrorKind::kInvalidConfig);

  const Dataset img = generate_gridlava({3, 2, 8, true, 0.15});
  CHECK(img.obs_spec == ObservationSpec::image(8, 8, 3));
}

TEST_CASE("planted modes each cover a meaningful share of timesteps") {
  const Dataset grid = generate_gridlava({11, 50, 8, false, 0.35});
  const Dataset point = generate_pointmass({11, 50, 80});
  // Failed gridlava episodes end before the approach phase, so that mode is rarer.
  for (const auto& [ds, share] : {std::pair{&grid, 0.05}, std::pair{&point, 0.1}}) {
    std::map<int, std::size_t> counts;
    std::size_t total = 0;
    for (const auto& t : ds->trajectories) {
      for (int m : *t.mode_labels) ++counts[m];
      total += t.size();
    }
    CHECK(counts.size() == 3);
    for (const auto& [mode, n] : counts) {
      CAPTURE(mode);
      CHECK(static_cast<double>(n) >= share * static_cast<double>(total));
    }
  }
}

TEST_CASE("gridlava scripted policy is suboptimal") {
  const auto stats = gridlava_outcomes({11, 200, 8, false, 0.35});
  const double rate = static_cast<double>(stats.successes) / stats.episodes;
  CHECK(rate >= 0.25);
  CHECK(rate <= 0.45);
}

TEST_CASE("pointmass generator contract") {
  const Dataset ds = generate_pointmass({3, 20, 80});
  CHECK(ds.obs_spec == ObservationSpec::vector(4));
  CHECK(ds.act_spec == ActionSpec::continuous(2));
  for (const auto& t : ds.trajectories) {
    for (const auto& a : t.actions) {
      for (double v : a) {
        CHECK(std::isfinite(v));
        CHECK(std::abs(v) <= 1.0);
      }
    }
  }
  CHECK(generate_pointmass({3, 5, 30}) == generate_pointmass({3, 5, 30}));
  CHECK_ERROR_KIND(generate_pointmass({3, 0, 30}), ErrorKind::kInvalidConfig);
  CHECK_ERROR_KIND(generate_pointmass({3, 1, 19}), ErrorKind::kInvalidConfig);
}

TEST_CASE("pointmass per-mode mean actions are separated") {
  const Dataset ds = generate_pointmass({1, 50, 80});
  std::map<int, std::array<double, 3>> sums;
  for (const auto& t : ds.trajectories) {
    for (std::size_t i = 0; i < t.size(); ++i) {
      auto& s = sums[(*t.mode_labels)[i]];
      s[0] += t.actions[i][0];
      s[1] += t.actions[i][1];
      s[2] += 1.0;
    }
  }
  REQUIRE(sums.size() == 3);
  std::vector<std::array<double, 2>> means;
  for (const auto& [m, s] : sums) means.push_back({s[0] / s[2], s[1] / s[2]});
  for (std::size_t i = 0; i < means.size(); ++i) {
    for (std::size_t j = i + 1; j < means.size(); ++j) {
      const double d = std::hypot(means[i][0] - means[j][0], means[i][1] - means[j][1]);
      CAPTURE(i);
      CAPTURE(j);
      CHECK(d >= 0.5);
    }
  }
}
