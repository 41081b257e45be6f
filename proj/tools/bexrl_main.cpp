#include <filesystem>
#include <functional>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "bexrl/pipeline/config.hpp"
#include "bexrl/pipeline/stages.hpp"
#include "bexrl/util/error.hpp"

namespace fs = std::filesystem;
using namespace bexrl;
using namespace bexrl::pipeline;

namespace {

// Outputs a command may create; those absent before the command ran are
// deleted again when it fails.
class OutputGuard {
 public:
  void watch(const fs::path& p) {
    if (p.empty()) return;
    std::error_code ec;
    if (!fs::exists(p, ec)) fresh_.push_back(p);
  }
  void rollback() const {
    for (const auto& p : fresh_) {
      std::error_code ec;
      fs::remove_all(p, ec);
    }
  }

 private:
  std::vector<fs::path> fresh_;
};

PipelineConfig base_config(const std::string& path) { return path.empty() ? PipelineConfig{} : load_config(path); }

MetricSpace parse_space(const std::string& s) {
  if (s == "codes") return MetricSpace::kCodes;
  if (s == "timesteps") return MetricSpace::kTimesteps;
  fail(ErrorKind::kInvalidConfig, "--space must be codes or timesteps");
}

seg::DistanceTerm parse_distance(const std::string& s) {
  if (s == "kernel") return seg::DistanceTerm::kKernel;
  if (s == "raw") return seg::DistanceTerm::kRaw;
  fail(ErrorKind::kInvalidConfig, "--distance must be kernel or raw");
}

template <typename T>
std::vector<T> parse_counts(const std::string& text, const std::string& what) {
  std::vector<T> out;
  for (double v : parse_number_list(text, what)) {
    if (v < 0 || v != static_cast<double>(static_cast<T>(v))) {
      fail(ErrorKind::kInvalidConfig, what + " must list non-negative integers");
    }
    out.push_back(static_cast<T>(v));
  }
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Behavior segmentation and action attribution for offline trajectories"};
  app.require_subcommand(1);

  OutputGuard guard;
  std::function<nlohmann::ordered_json()> action;

  // gen-data
  std::string env, out;
  std::uint64_t data_seed = 1;
  int episodes = 50, episode_len = 80, grid_size = 8;
  bool image = false;
  auto* gen = app.add_subcommand("gen-data", "Generate a synthetic dataset (JSONL)");
  gen->add_option("--env", env, "gridlava or pointmass")->required();
  gen->add_option("--seed", data_seed, "Generator seed");
  gen->add_option("--episodes", episodes, "Number of episodes");
  gen->add_option("--episode-len", episode_len, "Point-mass episode length");
  gen->add_option("--grid-size", grid_size, "Grid-lava side length");
  gen->add_flag("--image", image, "Grid-lava image observations");
  gen->add_option("--out", out, "Output dataset path")->required();
  gen->callback([&] {
    action = [&] {
      DataSource s;
      s.env = env;
      if (env != "gridlava" && env != "pointmass") fail(ErrorKind::kInvalidConfig, "--env must be gridlava or pointmass");
      s.seed = data_seed;
      s.episodes = episodes;
      s.episode_len = episode_len;
      s.grid_size = grid_size;
      s.image = image;
      guard.watch(out);
      return gen_data_stage(s, out);
    };
  });

  // train-vqvae
  std::string data, config, ckpt;
  std::optional<std::size_t> epochs, num_codes;
  std::optional<std::uint64_t> seed;
  auto* train = app.add_subcommand("train-vqvae", "Train the VQ-VAE tokenizer");
  train->add_option("--data", data, "Dataset path")->required();
  train->add_option("--config", config, "Pipeline config file ([vqvae] section)");
  train->add_option("--out-ckpt", ckpt, "Checkpoint output path")->required();
  train->add_option("--epochs", epochs, "Override number of epochs");
  train->add_option("--num-codes", num_codes, "Override codebook size");
  train->add_option("--seed", seed, "Override training seed");
  train->callback([&] {
    action = [&] {
      auto cfg = base_config(config).vqvae;
      if (epochs) cfg.num_epochs = *epochs;
      if (num_codes) cfg.model.num_codes = *num_codes;
      if (seed) cfg.seed = *seed;
      guard.watch(ckpt);
      return train_vqvae_stage(data, cfg, ckpt);
    };
  });

  // tokenize
  auto* tok = app.add_subcommand("tokenize", "Assign one codebook token per timestep");
  tok->add_option("--ckpt", ckpt, "VQ-VAE checkpoint")->required();
  tok->add_option("--data", data, "Dataset path")->required();
  tok->add_option("--out", out, "Token file output")->required();
  tok->callback([&] {
    action = [&] {
      guard.watch(out);
      return tokenize_stage(ckpt, data, out);
    };
  });

  // segment
  std::string tokens, distance;
  std::optional<double> lambda;
  std::optional<std::size_t> k, window;
  auto* segc = app.add_subcommand("segment", "Cluster tokens on the behavior graph");
  segc->add_option("--tokens", tokens, "Token file")->required();
  segc->add_option("--ckpt", ckpt, "VQ-VAE checkpoint")->required();
  segc->add_option("--config", config, "Pipeline config file ([segment] section)");
  segc->add_option("--lambda", lambda, "Mixing weight in [0, 1]");
  segc->add_option("--k", k, "Number of clusters (0 = eigengap)");
  segc->add_option("--window", window, "Smoothing window (odd, >= 3)");
  segc->add_option("--distance", distance, "kernel or raw");
  segc->add_option("--seed", seed, "k-means seed");
  segc->add_option("--out", out, "Cluster file output")->required();
  segc->callback([&] {
    action = [&] {
      auto cfg = base_config(config).segment;
      if (lambda) cfg.lambda = *lambda;
      if (k) cfg.k = *k;
      if (window) cfg.smoothing_window = *window;
      if (!distance.empty()) cfg.distance = parse_distance(distance);
      if (seed) cfg.seed = *seed;
      guard.watch(out);
      return segment_stage(tokens, ckpt, cfg, out);
    };
  });

  // train-bc
  std::string labels, out_dir;
  auto* bc = app.add_subcommand("train-bc", "Train the full-data policy and one model per cluster");
  bc->add_option("--data", data, "Dataset path")->required();
  bc->add_option("--labels", labels, "Cluster file")->required();
  bc->add_option("--config", config, "Pipeline config file ([bc] section)");
  bc->add_option("--epochs", epochs, "Override number of epochs");
  bc->add_option("--seed", seed, "Override training seed");
  bc->add_option("--out-dir", out_dir, "Model output directory")->required();
  bc->callback([&] {
    action = [&] {
      auto cfg = base_config(config).bc;
      if (epochs) cfg.num_epochs = *epochs;
      if (seed) cfg.seed = *seed;
      guard.watch(out_dir);
      return train_bc_stage(data, labels, cfg, out_dir);
    };
  });

  // attribute
  std::string policy, bc_dir;
  std::size_t sample_episodes = 20, sample_actions = 10;
  std::uint64_t sample_seed = 0;
  auto* att = app.add_subcommand("attribute", "Attribute sampled policy actions to clusters");
  att->add_option("--policy", policy, "Policy checkpoint")->required();
  att->add_option("--bc-dir", bc_dir, "Model directory from train-bc")->required();
  att->add_option("--data", data, "Dataset path")->required();
  att->add_option("--episodes", sample_episodes, "Episodes to sample");
  att->add_option("--actions", sample_actions, "Actions per episode");
  att->add_option("--seed", sample_seed, "Sampling seed");
  att->add_option("--out", out, "Attribution CSV output")->required();
  att->callback([&] {
    action = [&] {
      guard.watch(out);
      return attribute_stage(policy, bc_dir, data, {sample_episodes, sample_actions, sample_seed}, out);
    };
  });

  // evaluate
  std::string space = "codes";
  auto* ev = app.add_subcommand("evaluate", "Compute the metrics report");
  ev->add_option("--data", data, "Dataset path")->required();
  ev->add_option("--ckpt", ckpt, "VQ-VAE checkpoint")->required();
  ev->add_option("--tokens", tokens, "Token file")->required();
  ev->add_option("--labels", labels, "Cluster file")->required();
  ev->add_option("--bc-dir", bc_dir, "Model directory from train-bc")->required();
  ev->add_option("--episodes", sample_episodes, "Episodes to sample");
  ev->add_option("--actions", sample_actions, "Actions per episode");
  ev->add_option("--seed", sample_seed, "Sampling seed");
  ev->add_option("--space", space, "codes or timesteps");
  ev->add_option("--out", out, "Metrics JSON output (CSV written beside it)")->required();
  ev->callback([&] {
    action = [&] {
      const auto s = parse_space(space);
      guard.watch(out);
      fs::path csv = out;
      guard.watch(csv.replace_extension(".csv"));
      return evaluate_stage({data, ckpt, tokens, labels, bc_dir}, {sample_episodes, sample_actions, sample_seed}, s,
                            out);
    };
  });

  // sweep-lambda
  std::string grid = "0,0.1,0.2,0.3,0.4,0.5,0.6,0.7,0.8,0.9,1";
  auto* sl = app.add_subcommand("sweep-lambda", "Segmentation quality across lambda");
  sl->add_option("--data", data, "Dataset path")->required();
  sl->add_option("--ckpt", ckpt, "VQ-VAE checkpoint")->required();
  sl->add_option("--grid", grid, "Comma-separated lambda values");
  sl->add_option("--config", config, "Pipeline config file ([segment] section)");
  sl->add_option("--space", space, "codes or timesteps");
  sl->add_option("--out", out_dir, "Output directory")->required();
  sl->callback([&] {
    action = [&] {
      const auto values = parse_number_list(grid, "--grid");
      const auto s = parse_space(space);
      guard.watch(out_dir);
      guard.watch(fs::path(out_dir) / "sweep_lambda.csv");
      guard.watch(fs::path(out_dir) / "sweep_lambda.svg");
      return sweep_lambda_stage(data, ckpt, values, base_config(config).segment, s, out_dir);
    };
  });

  // sweep-codebook
  std::string sizes = "4,8,16,32", seeds = "0";
  auto* sc = app.add_subcommand("sweep-codebook", "Reconstruction and occupancy across codebook sizes");
  sc->add_option("--data", data, "Dataset path")->required();
  sc->add_option("--sizes", sizes, "Comma-separated codebook sizes");
  sc->add_option("--seeds", seeds, "Comma-separated training seeds");
  sc->add_option("--config", config, "Pipeline config file ([vqvae] section)");
  sc->add_option("--epochs", epochs, "Override number of epochs");
  sc->add_option("--out", out_dir, "Output directory")->required();
  sc->callback([&] {
    action = [&] {
      auto cfg = base_config(config).vqvae;
      if (epochs) cfg.num_epochs = *epochs;
      const auto n = parse_counts<std::size_t>(sizes, "--sizes");
      const auto s = parse_counts<std::uint64_t>(seeds, "--seeds");
      guard.watch(out_dir);
      guard.watch(fs::path(out_dir) / "sweep_codebook.csv");
      guard.watch(fs::path(out_dir) / "sweep_codebook.svg");
      return sweep_codebook_stage(data, cfg, n, s, out_dir);
    };
  });

  // report
  std::string run_dir;
  auto* rep = app.add_subcommand("report", "Collate run outputs into a static report directory");
  rep->add_option("--run-dir", run_dir, "Run directory")->required();
  rep->add_option("--out", out_dir, "Report directory")->required();
  rep->callback([&] {
    action = [&] {
      guard.watch(out_dir);
      return report_stage(run_dir, out_dir);
    };
  });

  // run
  auto* run = app.add_subcommand("run", "Run every stage from one config file");
  run->add_option("--config", config, "Pipeline config file")->required();
  run->add_option("--out", out_dir, "Override output directory");
  run->callback([&] {
    action = [&] {
      auto cfg = load_config(config);
      if (!out_dir.empty()) cfg.output_dir = out_dir;
      guard.watch(cfg.output_dir);
      return run_stage(cfg);
    };
  });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : static_cast<int>(ErrorKind::kUsage);
  }

  try {
    if (!action) return static_cast<int>(ErrorKind::kUsage);
    std::cout << action().dump() << std::endl;
    return 0;
  } catch (const Error& e) {
    guard.rollback();
    std::cerr << "error [" << error_kind_name(e.kind()) << "]: " << e.what() << std::endl;
    return e.exit_code();
  } catch (const fs::filesystem_error& e) {
    guard.rollback();
    std::cerr << "error [" << error_kind_name(ErrorKind::kIo) << "]: " << e.what() << std::endl;
    return static_cast<int>(ErrorKind::kIo);
  } catch (const nlohmann::json::exception& e) {
    guard.rollback();
    std::cerr << "error [" << error_kind_name(ErrorKind::kParse) << "]: " << e.what() << std::endl;
    return static_cast<int>(ErrorKind::kParse);
  } catch (const std::exception& e) {
    guard.rollback();
    std::cerr << "error: " << e.what() << std::endl;
    return 1;
  }
}
