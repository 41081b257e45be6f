#include <doctest.h>

#include <algorithm>
#include <filesystem>
#include <map>
#include <set>

#include "../common/cli.hpp"
#include "bexrl/data/generators.hpp"
#include "bexrl/pipeline/artifacts.hpp"
#include "bexrl/pipeline/config.hpp"
#include "bexrl/pipeline/stages.hpp"
#include "bexrl/pipeline/svg.hpp"
#include "bexrl/util/hash.hpp"
#include "test_support.hpp"

using namespace bexrl;
using namespace bexrl::pipeline;
using namespace bexrl::cli_test;
namespace fs = std::filesystem;

namespace {

std::size_t count_of(const std::string& text, const std::string& needle) {
  std::size_t n = 0;
  for (auto pos = text.find(needle); pos != std::string::npos; pos = text.find(needle, pos + 1)) ++n;
  return n;
}

std::size_t data_lines(const std::string& csv) {
  std::size_t n = 0;
  std::istringstream in(csv);
  std::string line;
  bool header = false;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    if (!header) {
      header = true;
      continue;
    }
    ++n;
  }
  return n;
}

}  // namespace

TEST_CASE("config text") {
  SUBCASE("empty text gives the defaults and round-trips") {
    const auto cfg = parse_config("");
    CHECK(cfg.segment.lambda == 0.5);
    CHECK(cfg.segment.k == 0);
    CHECK(cfg.vqvae.model.num_codes == 16);
    CHECK(config_to_text(parse_config(config_to_text(cfg))) == config_to_text(cfg));
  }
  SUBCASE("values, comments and sections") {
    const auto cfg = parse_config(
        "# leading comment\n[data]\nenv = \"gridlava\"  # inline\nepisodes = 7\n\n[segment]\nlambda = 0.25\nk = 3\n"
        "[sweep]\nlambda_grid = \"0, 0.5,1\"\n");
    CHECK(cfg.data.env == "gridlava");
    CHECK(cfg.data.episodes == 7);
    CHECK(cfg.segment.lambda == 0.25);
    CHECK(cfg.segment.k == 3);
    CHECK(cfg.sweep.lambda_grid == std::vector<double>{0.0, 0.5, 1.0});
  }
  SUBCASE("errors") {
    CHECK_ERROR_KIND(parse_config("[segment]\nbogus = 1\n"), ErrorKind::kInvalidConfig);
    CHECK_ERROR_KIND(parse_config("[segment]\nlambda\n"), ErrorKind::kParse);
    CHECK_ERROR_KIND(parse_config("[segment\n"), ErrorKind::kParse);
    CHECK_ERROR_KIND(parse_config("[segment]\nk = 2\nk = 3\n"), ErrorKind::kParse);
    CHECK_ERROR_KIND(parse_config("[data]\nenv = \"gridlava\n"), ErrorKind::kParse);
    CHECK_ERROR_KIND(parse_config("[segment]\nlambda = 1.5\n"), ErrorKind::kInvalidLambda);
    CHECK_ERROR_KIND(parse_config("[segment]\nsmoothing_window = 4\n"), ErrorKind::kInvalidWindow);
    CHECK_ERROR_KIND(parse_config("[data]\nenv = \"atari\"\n"), ErrorKind::kInvalidConfig);
    CHECK_ERROR_KIND(parse_config("[data]\npath = \"/nonexistent/bexrl.jsonl\"\n"), ErrorKind::kIo);
    CHECK_ERROR_KIND(parse_config("[vqvae]\ncodebook_lr_scale = 0\n"), ErrorKind::kInvalidConfig);
    CHECK_ERROR_KIND(parse_config("[sweep]\nlambda_grid = \"0,x\"\n"), ErrorKind::kInvalidConfig);
    CHECK_ERROR_KIND(load_config("/nonexistent/bexrl.toml"), ErrorKind::kIo);
  }
}

TEST_CASE("lineage hashes") {
  CHECK(hex64(fnv1a64("")) == "cbf29ce484222325");
  CHECK(hex64(fnv1a64("a")) == "af63dc4c8601ec8c");
  CHECK(lineage_hash("tokenize", "x", "p") == lineage_hash("tokenize", "x", "p"));
  CHECK(lineage_hash("tokenize", "x", "p") != lineage_hash("tokenize", "y", "p"));
  CHECK(lineage_hash("tokenize", "x", "p") != lineage_hash("tokenize", "x", "q"));
  CHECK(lineage_hash("tokenize", "x", "p") != lineage_hash("segment", "x", "p"));

  data::PointMassConfig pm;
  pm.num_episodes = 2;
  pm.episode_len = 20;
  auto ds = data::generate_pointmass(pm);
  const auto h = dataset_hash(ds);
  ds.trajectories[1].actions[3][0] += 1e-12;
  CHECK(dataset_hash(ds) != h);

  const Lineage child{"c", "parent", "data"};
  CHECK_NOTHROW(require_parent(child, "parent", "tokens"));
  CHECK_ERROR_KIND(require_parent(child, "other", "tokens"), ErrorKind::kStaleArtifact);
  CHECK_ERROR_KIND(require_data(child, "other", "tokens"), ErrorKind::kStaleArtifact);
  CHECK_ERROR_KIND(lineage_from_json(nlohmann::json::object(), "tokens"), ErrorKind::kStaleArtifact);

  TokenFile tf{child, 8, {{0, {1, 2, 3}}, {1, {7}}}};
  const auto back = tokens_from_json(tokens_to_json(tf));
  CHECK(back.num_codes == 8);
  CHECK(back.sequences[0].tokens == tf.sequences[0].tokens);
  CHECK(back.sequences[1].tokens == tf.sequences[1].tokens);
  CHECK(back.lineage.parent_hash == "parent");
  tf.sequences[1].tokens = {8};
  CHECK_ERROR_KIND(tokens_from_json(tokens_to_json(tf)), ErrorKind::kUnknownToken);
}

TEST_CASE("svg output") {
  const seg::EpisodeLabels labels{{0, 0, 1, 2}, {2, 2}, {1, 0, 0, 0, 0, 1, 1}};
  const auto svg = label_strips(labels, "episodes & labels");
  CHECK(count_of(svg, "<rect") == 13);
  CHECK(svg.find("&amp;") != std::string::npos);
  CHECK(count_of(label_strips({}, "none"), "<rect") == 0);

  const auto plot = line_plot("quality", "lambda", "score", {{"silhouette", {0, 0.5, 1}, {0.2, 0.7, 0.4}},
                                                              {"davies_bouldin", {0, 0.5, 1}, {1.1, 0.4, 0.9}}});
  CHECK(plot.rfind("<svg", 0) == 0);
  CHECK(plot.find(">lambda<") != std::string::npos);
  CHECK(plot.find(">score<") != std::string::npos);
  CHECK(plot.find("silhouette") != std::string::npos);
  CHECK(plot.find("davies_bouldin") != std::string::npos);
}

TEST_CASE("error kinds have distinct exit codes") {
  const std::vector<ErrorKind> all{
      ErrorKind::kUsage,         ErrorKind::kParse,          ErrorKind::kSpecMismatch,    ErrorKind::kEmptyDataset,
      ErrorKind::kIo,            ErrorKind::kInvalidConfig,  ErrorKind::kShape,           ErrorKind::kNonScalarLoss,
      ErrorKind::kDimMismatch,   ErrorKind::kDivergence,     ErrorKind::kInvalidLambda,   ErrorKind::kEmptyTokens,
      ErrorKind::kConvergence,   ErrorKind::kTooFewNodes,    ErrorKind::kDegenerateEmbedding, ErrorKind::kUnknownToken,
      ErrorKind::kInvalidWindow, ErrorKind::kEmptySegments,  ErrorKind::kInvalidDistribution, ErrorKind::kSingleCluster,
      ErrorKind::kCoincidentCentroids, ErrorKind::kLengthMismatch, ErrorKind::kStaleArtifact};
  std::set<int> codes;
  std::set<std::string_view> names;
  for (auto k : all) {
    const int c = Error(k, "x").exit_code();
    CHECK(c > 1);
    CHECK(c < 126);
    codes.insert(c);
    names.insert(error_kind_name(k));
  }
  CHECK(codes.size() == all.size());
  CHECK(names.size() == all.size());
}

TEST_CASE("command line stages") {
  const auto dir = fresh_dir("bexrl_cli_test");
  const auto p = [&](const std::string& name) { return (dir / name).string(); };

  SUBCASE("gen-data is deterministic and validates") {
    REQUIRE(run_cli("gen-data --env gridlava --seed 1 --episodes 10 --out " + p("a.jsonl")).exit_code == 0);
    REQUIRE(run_cli("gen-data --env gridlava --seed 1 --episodes 10 --out " + p("b.jsonl")).exit_code == 0);
    CHECK(slurp(p("a.jsonl")) == slurp(p("b.jsonl")));
    CHECK(data::load_dataset(p("a.jsonl")).trajectories.size() == 10);
    CHECK(run_cli("gen-data --env gridlava --episodes 0 --out " + p("c.jsonl")).exit_code == 14);
    CHECK(!fs::exists(p("c.jsonl")));
    CHECK(run_cli("gen-data --env mujoco --out " + p("c.jsonl")).exit_code == 14);
    CHECK(run_cli("gen-data --out " + p("c.jsonl")).exit_code == 2);
    CHECK(run_cli("no-such-verb").exit_code == 2);
    CHECK(run_cli("").exit_code == 2);
  }

  SUBCASE("stage chain, staleness and rollback") {
    const auto status = run_cli("gen-data --env pointmass --seed 2 --episodes 6 --episode-len 20 --out " + p("d.jsonl"));
    REQUIRE(status.exit_code == 0);
    CHECK(nlohmann::json::parse(status.out).at("command") == "gen-data");
    REQUIRE(run_cli("train-vqvae --data " + p("d.jsonl") + " --epochs 2 --out-ckpt " + p("m.bxrl")).exit_code == 0);
    REQUIRE(run_cli("tokenize --ckpt " + p("m.bxrl") + " --data " + p("d.jsonl") + " --out " + p("t.json")).exit_code == 0);

    const std::string seg = "segment --tokens " + p("t.json") + " --ckpt " + p("m.bxrl") + " --k 2 ";
    CHECK(run_cli(seg + "--lambda 1.5 --out " + p("bad.json")).exit_code == 30);
    CHECK(!fs::exists(p("bad.json")));
    CHECK(run_cli(seg + "--window 4 --out " + p("bad.json")).exit_code == 36);
    REQUIRE(run_cli(seg + "--out " + p("c1.json")).exit_code == 0);
    REQUIRE(run_cli(seg + "--out " + p("c2.json")).exit_code == 0);
    CHECK(slurp(p("c1.json")) == slurp(p("c2.json")));

    // A retrained checkpoint no longer matches the token file.
    REQUIRE(run_cli("train-vqvae --data " + p("d.jsonl") + " --epochs 1 --out-ckpt " + p("m2.bxrl")).exit_code == 0);
    CHECK(run_cli("segment --tokens " + p("t.json") + " --ckpt " + p("m2.bxrl") + " --out " + p("bad.json")).exit_code ==
          60);
    CHECK(!fs::exists(p("bad.json")));

    // Labels from one dataset cannot train models on another.
    REQUIRE(run_cli("gen-data --env pointmass --seed 3 --episodes 6 --episode-len 20 --out " + p("e.jsonl")).exit_code == 0);
    CHECK(run_cli("train-bc --data " + p("e.jsonl") + " --labels " + p("c1.json") + " --epochs 1 --out-dir " + p("bc"))
              .exit_code == 60);
    CHECK(!fs::exists(p("bc")));

    const auto sweep = run_cli("sweep-lambda --data " + p("d.jsonl") + " --ckpt " + p("m.bxrl") + " --grid 0.5 --out " +
                               p("sw"));
    REQUIRE(sweep.exit_code == 0);
    CHECK(data_lines(slurp(dir / "sw" / "sweep_lambda.csv")) == 1);
    REQUIRE(run_cli("sweep-lambda --data " + p("d.jsonl") + " --ckpt " + p("m.bxrl") + " --grid 0,0.3,1 --out " +
                    p("sw3")).exit_code == 0);
    CHECK(data_lines(slurp(dir / "sw3" / "sweep_lambda.csv")) == 3);
    CHECK(run_cli("sweep-lambda --data " + p("d.jsonl") + " --ckpt " + p("m.bxrl") + " --grid 0,2 --out " + p("sw4"))
              .exit_code == 30);
  }

  SUBCASE("report needs a run directory") {
    CHECK(run_cli("report --run-dir " + p("missing") + " --out " + p("rep")).exit_code == 13);
    CHECK(!fs::exists(p("rep")));
  }

  fs::remove_all(dir);
}

TEST_CASE("codebook sweep: recon non-increasing in N on average, occupancy bounded, repeatable") {
  data::PointMassConfig pm;
  pm.seed = 1;
  pm.num_episodes = 12;
  pm.episode_len = 40;
  const auto ds = data::generate_pointmass(pm);
  vq::TrainConfig base;
  base.num_epochs = 15;
  const std::vector<std::size_t> sizes{2, 4, 8, 16};
  const auto rows = sweep_codebook(ds, base, sizes, {0, 1, 2});
  REQUIRE(rows.size() == 12);
  std::map<std::size_t, double> mean;
  for (const auto& r : rows) {
    CHECK(r.occupancy >= 0.0);
    CHECK(r.occupancy <= 1.0);
    mean[r.num_codes] += r.normalized_recon / 3.0;
  }
  for (std::size_t i = 1; i < sizes.size(); ++i) {
    CAPTURE(sizes[i]);
    CHECK(mean[sizes[i]] <= mean[sizes[i - 1]]);
  }
  const auto again = sweep_codebook(ds, base, {4}, {1});
  const auto& ref = *std::find_if(rows.begin(), rows.end(), [](auto& r) { return r.num_codes == 4 && r.seed == 1; });
  CHECK(again[0].normalized_recon == ref.normalized_recon);
  CHECK(again[0].occupancy == ref.occupancy);
}
