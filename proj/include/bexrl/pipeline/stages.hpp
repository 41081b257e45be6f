#pragma once

#include <cstddef>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include <json.hpp>

#include "bexrl/attr/attribute.hpp"
#include "bexrl/attr/bc_model.hpp"
#include "bexrl/metrics/baselines.hpp"
#include "bexrl/metrics/report.hpp"
#include "bexrl/pipeline/artifacts.hpp"
#include "bexrl/pipeline/config.hpp"
#include "bexrl/seg/behavior_graph.hpp"
#include "bexrl/seg/labels.hpp"
#include "bexrl/seg/spectral.hpp"
#include "bexrl/vq/model.hpp"

namespace bexrl::pipeline {

namespace fs = std::filesystem;

// BXRL_THREADS, default 1.
std::size_t thread_count();
// Runs fn(0..n-1) on up to thread_count() workers. The first error is rethrown.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn);

struct Segmentation {
  seg::BehaviorGraph graph;
  seg::SpectralDecomposition decomposition;
  std::vector<int> node_labels;  // per graph node
  seg::EpisodeLabels unsmoothed;
  seg::ClusterAssignment assignment;
};

Segmentation segment_tokens(const std::vector<vq::TokenSequence>& tokens, const vq::Codebook& codebook,
                            const SegmentConfig& cfg);

// (observation, action) pairs grouped by cluster label.
std::vector<std::vector<attr::StateAction>> cluster_pairs(const data::Dataset& ds, const seg::EpisodeLabels& labels,
                                                          std::size_t k);

// One model per cluster, trained on its smoothed-label segments. A cluster
// that smoothing emptied falls back to its unsmoothed timesteps.
std::vector<attr::BcModel> train_cluster_models(const data::Dataset& ds, const seg::EpisodeLabels& smoothed,
                                                const seg::EpisodeLabels& unsmoothed, std::size_t k,
                                                const attr::BcConfig& cfg);

// Points and labels for silhouette / Davies-Bouldin.
void structure_points(const vq::Codebook& codebook, const std::vector<vq::TokenSequence>& tokens,
                      const seg::ClusterAssignment& assignment, MetricSpace space, seg::Points& points,
                      std::vector<int>& labels);

struct EvalInputs {
  const data::Dataset* dataset = nullptr;
  const vq::VqVaeModel* model = nullptr;
  double occupancy = 0.0;
  const std::vector<vq::TokenSequence>* tokens = nullptr;
  const seg::ClusterAssignment* assignment = nullptr;
  const attr::BcModel* policy = nullptr;
  const std::vector<attr::BcModel>* clusters = nullptr;
  attr::SampleSpec samples;
  MetricSpace space = MetricSpace::kCodes;
};

metrics::MetricsReport evaluate(const EvalInputs& in);

// Planted per-timestep modes concatenated over episodes, or empty when any
// trajectory lacks them.
std::vector<int> planted_modes(const data::Dataset& ds);
std::vector<int> flatten(const seg::EpisodeLabels& labels);

struct LambdaRow {
  double lambda = 0.0;
  std::size_t k = 0;
  double silhouette = 0.0;
  double davies_bouldin = 0.0;
  bool ok = false;
  std::string error;
};

std::vector<LambdaRow> sweep_lambda(const std::vector<vq::TokenSequence>& tokens, const vq::Codebook& codebook,
                                    const std::vector<double>& grid, const SegmentConfig& base, MetricSpace space);

struct CodebookRow {
  std::size_t num_codes = 0;
  std::uint64_t seed = 0;
  double normalized_recon = 0.0;
  double occupancy = 0.0;
};

std::vector<CodebookRow> sweep_codebook(const data::Dataset& ds, const vq::TrainConfig& base,
                                        const std::vector<std::size_t>& sizes,
                                        const std::vector<std::uint64_t>& seeds);

// File-level stages shared by the CLI verbs and `run`. Each returns the JSON
// status object the CLI prints.
nlohmann::ordered_json gen_data_stage(const DataSource& source, const fs::path& out);
nlohmann::ordered_json train_vqvae_stage(const fs::path& data, const vq::TrainConfig& cfg, const fs::path& out_ckpt);
nlohmann::ordered_json tokenize_stage(const fs::path& ckpt, const fs::path& data, const fs::path& out);
nlohmann::ordered_json segment_stage(const fs::path& tokens, const fs::path& ckpt, const SegmentConfig& cfg,
                                     const fs::path& out);
nlohmann::ordered_json train_bc_stage(const fs::path& data, const fs::path& labels, const attr::BcConfig& cfg,
                                      const fs::path& out_dir);
nlohmann::ordered_json attribute_stage(const fs::path& policy, const fs::path& bc_dir, const fs::path& data,
                                       const attr::SampleSpec& spec, const fs::path& out);

struct EvaluatePaths {
  fs::path data, ckpt, tokens, labels, bc_dir;
};

// Writes the MetricsReport JSON to `out` and a one-row CSV beside it.
nlohmann::ordered_json evaluate_stage(const EvaluatePaths& paths, const attr::SampleSpec& spec, MetricSpace space,
                                      const fs::path& out);
// Raw state-action and k-means-on-latents structure baselines with the
// pipeline's k, next to the pipeline's own scores.
nlohmann::ordered_json baselines_stage(const EvaluatePaths& paths, MetricSpace space, std::uint64_t seed,
                                       const fs::path& out);
nlohmann::ordered_json sweep_lambda_stage(const fs::path& data, const fs::path& ckpt, const std::vector<double>& grid,
                                          const SegmentConfig& base, MetricSpace space, const fs::path& out_dir);
nlohmann::ordered_json sweep_codebook_stage(const fs::path& data, const vq::TrainConfig& base,
                                            const std::vector<std::size_t>& sizes,
                                            const std::vector<std::uint64_t>& seeds, const fs::path& out_dir);
nlohmann::ordered_json report_stage(const fs::path& run_dir, const fs::path& out_dir);

// Every stage in order inside cfg.output_dir.
nlohmann::ordered_json run_stage(const PipelineConfig& cfg);

}  // namespace bexrl::pipeline
