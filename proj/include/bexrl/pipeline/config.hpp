#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "bexrl/attr/attribute.hpp"
#include "bexrl/attr/bc_model.hpp"
#include "bexrl/data/dataset.hpp"
#include "bexrl/seg/behavior_graph.hpp"
#include "bexrl/vq/train.hpp"

namespace bexrl::pipeline {

struct DataSource {
  std::string env = "pointmass";  // pointmass | gridlava; ignored when path is set
  std::filesystem::path path;
  std::uint64_t seed = 1;
  int episodes = 50;
  int episode_len = 80;  // pointmass
  double action_noise = 0.1;  // pointmass
  int grid_size = 8;     // gridlava
  bool image = false;    // gridlava
};

struct SegmentConfig {
  double lambda = 0.5;
  std::size_t k = 0;  // 0 selects k by eigengap
  std::size_t smoothing_window = 5;
  seg::DistanceTerm distance = seg::DistanceTerm::kKernel;
  std::uint64_t seed = 0;
};

// Points used for silhouette / Davies-Bouldin.
enum class MetricSpace {
  kCodes,      // code vectors of appearing tokens, labeled by cluster
  kTimesteps,  // one code vector per timestep, labeled by smoothed label
};

struct SweepConfig {
  std::vector<double> lambda_grid{0.0, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0};
  std::vector<std::size_t> codebook_sizes;  // empty skips the codebook sweep in `run`
  std::vector<std::uint64_t> codebook_seeds{0};
};

// Comma-separated numbers, e.g. "0,0.1,0.5".
std::vector<double> parse_number_list(const std::string& text, const std::string& what);

struct PipelineConfig {
  DataSource data;
  vq::TrainConfig vqvae;
  SegmentConfig segment;
  attr::BcConfig bc;
  attr::SampleSpec metrics;
  MetricSpace metric_space = MetricSpace::kCodes;
  SweepConfig sweep;
  std::filesystem::path output_dir = "run";
};

// Flat "key = value" lines grouped under [section] headers. Values are numbers,
// true/false, or double-quoted strings; '#' starts a comment. Unknown keys are
// rejected. Relative data paths resolve against `base_dir`.
PipelineConfig parse_config(const std::string& text, const std::filesystem::path& base_dir = {});
PipelineConfig load_config(const std::filesystem::path& path);
std::string config_to_text(const PipelineConfig& cfg);

nlohmann::ordered_json config_to_json(const PipelineConfig& cfg);
nlohmann::ordered_json segment_config_to_json(const SegmentConfig& cfg);

data::Dataset load_or_generate(const DataSource& source);

}  // namespace bexrl::pipeline
