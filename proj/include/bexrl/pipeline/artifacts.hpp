#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "bexrl/data/dataset.hpp"
#include "bexrl/seg/labels.hpp"
#include "bexrl/vq/model.hpp"

namespace bexrl::pipeline {

// Every artifact records the hash of the configuration lineage that produced
// it (config_hash) and the hash of the artifact it was derived from
// (parent_hash), plus the hash of the dataset at the root of the chain.
// Consumers refuse inputs whose lineage does not line up.
struct Lineage {
  std::string config_hash;
  std::string parent_hash;
  std::string data_hash;
};

std::string lineage_hash(std::string_view stage, const std::string& payload, const std::string& parent);
std::string dataset_hash(const data::Dataset& ds);

// Throws StaleArtifact when `child.parent_hash` differs from `parent_hash`.
void require_parent(const Lineage& child, const std::string& parent_hash, const std::string& what);
void require_data(const Lineage& artifact, const std::string& data_hash, const std::string& what);

Lineage lineage_from_json(const nlohmann::json& j, const std::string& what);
void put_lineage(nlohmann::ordered_json& j, const Lineage& lineage);

struct TokenFile {
  Lineage lineage;
  std::size_t num_codes = 0;
  std::vector<vq::TokenSequence> sequences;
};

nlohmann::ordered_json tokens_to_json(const TokenFile& file);
TokenFile tokens_from_json(const nlohmann::json& j);

struct ClusterFile {
  Lineage lineage;
  seg::ClusterAssignment assignment;
  seg::EpisodeLabels unsmoothed;  // cluster(token(t)) before smoothing
  nlohmann::ordered_json settings;  // segmentation parameters, echoed into reports
};

nlohmann::ordered_json clusters_to_json(const ClusterFile& file);
ClusterFile clusters_from_json(const nlohmann::json& j);

std::string read_text(const std::filesystem::path& path);
void write_text(const std::filesystem::path& path, const std::string& text);
nlohmann::json read_json(const std::filesystem::path& path);
// Pretty-printed with a trailing newline.
void write_json(const std::filesystem::path& path, const nlohmann::ordered_json& j);

}  // namespace bexrl::pipeline
