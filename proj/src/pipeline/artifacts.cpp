#include "bexrl/pipeline/artifacts.hpp"

#include <fstream>
#include <sstream>

#include "bexrl/util/error.hpp"
#include "bexrl/util/hash.hpp"

namespace bexrl::pipeline {

std::string lineage_hash(std::string_view stage, const std::string& payload, const std::string& parent) {
  std::string bytes(stage);
  bytes += '\n';
  bytes += payload;
  bytes += '\n';
  bytes += parent;
  return hex64(fnv1a64(bytes));
}

std::string dataset_hash(const data::Dataset& ds) { return hex64(fnv1a64(data::serialize_dataset(ds))); }

void require_parent(const Lineage& child, const std::string& parent_hash, const std::string& what) {
  if (child.parent_hash != parent_hash) {
    fail(ErrorKind::kStaleArtifact, what + " was produced from " + child.parent_hash + ", expected " + parent_hash);
  }
}

void require_data(const Lineage& artifact, const std::string& data_hash, const std::string& what) {
  if (artifact.data_hash != data_hash) {
    fail(ErrorKind::kStaleArtifact, what + " was built from dataset " + artifact.data_hash + ", not " + data_hash);
  }
}

Lineage lineage_from_json(const nlohmann::json& j, const std::string& what) {
  for (const char* key : {"config_hash", "parent_hash", "data_hash"}) {
    if (!j.contains(key) || !j[key].is_string()) fail(ErrorKind::kStaleArtifact, what + " carries no " + key);
  }
  return {j["config_hash"].get<std::string>(), j["parent_hash"].get<std::string>(),
          j["data_hash"].get<std::string>()};
}

void put_lineage(nlohmann::ordered_json& j, const Lineage& lineage) {
  j["config_hash"] = lineage.config_hash;
  j["parent_hash"] = lineage.parent_hash;
  j["data_hash"] = lineage.data_hash;
}

nlohmann::ordered_json tokens_to_json(const TokenFile& file) {
  nlohmann::ordered_json j;
  put_lineage(j, file.lineage);
  j["num_codes"] = file.num_codes;
  auto& seqs = j["trajectories"] = nlohmann::ordered_json::array();
  for (const auto& s : file.sequences) {
    seqs.push_back({{"trajectory", s.trajectory}, {"tokens", s.tokens}});
  }
  return j;
}

TokenFile tokens_from_json(const nlohmann::json& j) {
  TokenFile file;
  file.lineage = lineage_from_json(j, "token file");
  try {
    file.num_codes = j.at("num_codes").get<std::size_t>();
    for (const auto& s : j.at("trajectories")) {
      vq::TokenSequence seq;
      seq.trajectory = s.at("trajectory").get<std::size_t>();
      seq.tokens = s.at("tokens").get<std::vector<std::size_t>>();
      for (auto t : seq.tokens) {
        if (t >= file.num_codes) fail(ErrorKind::kUnknownToken, "token " + std::to_string(t) + " outside codebook");
      }
      file.sequences.push_back(std::move(seq));
    }
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::kParse, std::string("token file: ") + e.what());
  }
  return file;
}

nlohmann::ordered_json clusters_to_json(const ClusterFile& file) {
  const auto& a = file.assignment;
  nlohmann::ordered_json j;
  put_lineage(j, file.lineage);
  j["k"] = a.k;
  auto& map = j["token_to_cluster"] = nlohmann::ordered_json::object();
  for (const auto& [token, cluster] : a.token_to_cluster) map[std::to_string(token)] = cluster;
  j["episodes"] = a.episodes;
  j["lambda"] = a.lambda;
  j["eigenvalues"] = a.eigenvalues;
  j["unsmoothed"] = file.unsmoothed;
  j["settings"] = file.settings;
  return j;
}

ClusterFile clusters_from_json(const nlohmann::json& j) {
  ClusterFile file;
  file.lineage = lineage_from_json(j, "cluster file");
  auto& a = file.assignment;
  try {
    a.k = j.at("k").get<std::size_t>();
    for (const auto& [token, cluster] : j.at("token_to_cluster").items()) {
      a.token_to_cluster[std::stoul(token)] = cluster.get<int>();
    }
    a.episodes = j.at("episodes").get<seg::EpisodeLabels>();
    a.lambda = j.at("lambda").get<double>();
    a.eigenvalues = j.at("eigenvalues").get<std::vector<double>>();
    file.unsmoothed = j.at("unsmoothed").get<seg::EpisodeLabels>();
    file.settings = j.value("settings", nlohmann::ordered_json::object());
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::kParse, std::string("cluster file: ") + e.what());
  } catch (const std::logic_error& e) {
    fail(ErrorKind::kParse, std::string("cluster file: bad token id: ") + e.what());
  }
  if (file.unsmoothed.size() != a.episodes.size()) fail(ErrorKind::kParse, "cluster file: episode count mismatch");
  for (const auto* labels : {&a.episodes, &file.unsmoothed}) {
    for (const auto& ep : *labels) {
      for (int l : ep) {
        if (l < 0 || static_cast<std::size_t>(l) >= a.k) {
          fail(ErrorKind::kParse, "cluster file: label " + std::to_string(l) + " outside [0, k)");
        }
      }
    }
  }
  return file;
}

std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::kIo, "cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorKind::kIo, "cannot write " + path.string());
  out << text;
  if (!out) fail(ErrorKind::kIo, "write failed for " + path.string());
}

nlohmann::json read_json(const std::filesystem::path& path) {
  const std::string text = read_text(path);
  try {
    return nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::kParse, path.string() + ": " + e.what());
  }
}

void write_json(const std::filesystem::path& path, const nlohmann::ordered_json& j) {
  write_text(path, j.dump(2) + "\n");
}

}  // namespace bexrl::pipeline
