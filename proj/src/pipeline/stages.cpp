#include "bexrl/pipeline/stages.hpp"

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <exception>
#include <map>
#include <mutex>
#include <optional>
#include <set>
#include <sstream>
#include <thread>

#include "bexrl/ad/checkpoint.hpp"
#include "bexrl/metrics/cluster_metrics.hpp"
#include "bexrl/metrics/fidelity.hpp"
#include "bexrl/pipeline/svg.hpp"
#include "bexrl/util/error.hpp"
#include "bexrl/vq/train.hpp"

namespace bexrl::pipeline {

namespace {

using metrics::format_number;

std::string hash_comment(const std::string& hash) { return "# config_hash: " + hash + "\n"; }

struct LoadedChain {
  data::Dataset dataset;
  std::string data_hash;
  ad::Checkpoint checkpoint;
  Lineage ckpt_lineage;
  TokenFile tokens;
  ClusterFile clusters;
};

LoadedChain load_chain(const fs::path& data, const fs::path& ckpt, const fs::path* tokens, const fs::path* labels) {
  LoadedChain c;
  c.dataset = data::load_dataset(data);
  c.data_hash = dataset_hash(c.dataset);
  c.checkpoint = ad::read_checkpoint(ckpt);
  c.ckpt_lineage = lineage_from_json(c.checkpoint.metadata, "checkpoint " + ckpt.string());
  require_data(c.ckpt_lineage, c.data_hash, "checkpoint " + ckpt.string());
  if (tokens) {
    c.tokens = tokens_from_json(read_json(*tokens));
    require_parent(c.tokens.lineage, c.ckpt_lineage.config_hash, "token file " + tokens->string());
  }
  if (labels) {
    c.clusters = clusters_from_json(read_json(*labels));
    require_parent(c.clusters.lineage, c.tokens.lineage.config_hash, "cluster file " + labels->string());
  }
  return c;
}

struct BcDir {
  Lineage lineage;
  nlohmann::json manifest;
  attr::BcModel policy;
  std::vector<attr::BcModel> clusters;
};

BcDir load_bc_dir(const fs::path& dir, const fs::path& policy_path, const std::string& data_hash) {
  if (!fs::is_directory(dir)) fail(ErrorKind::kIo, "missing model directory " + dir.string());
  const auto manifest = read_json(dir / "manifest.json");
  const Lineage lineage = lineage_from_json(manifest, "model manifest");
  require_data(lineage, data_hash, "model manifest");
  auto policy_ckpt = ad::read_checkpoint(policy_path);
  require_data(lineage_from_json(policy_ckpt.metadata, "policy checkpoint"), data_hash, "policy checkpoint");
  BcDir out{lineage, manifest, attr::BcModel::from_checkpoint(policy_ckpt), {}};
  const auto files = manifest.at("clusters").get<std::vector<std::string>>();
  for (const auto& f : files) {
    auto ckpt = ad::read_checkpoint(dir / f);
    require_parent(lineage_from_json(ckpt.metadata, f), lineage.parent_hash, "cluster model " + f);
    out.clusters.push_back(attr::BcModel::from_checkpoint(ckpt));
  }
  if (out.clusters.empty()) fail(ErrorKind::kEmptySegments, "model manifest lists no cluster models");
  return out;
}

nlohmann::ordered_json sample_spec_json(const attr::SampleSpec& spec) {
  return {{"episodes", spec.episodes}, {"actions_per_episode", spec.actions_per_episode}, {"seed", spec.seed}};
}

const char* space_name(MetricSpace space) { return space == MetricSpace::kCodes ? "codes" : "timesteps"; }

nlohmann::ordered_json structure_json(const metrics::StructureScores& s, const std::vector<int>& planted,
                                      const std::vector<int>& per_timestep) {
  nlohmann::ordered_json j;
  j["silhouette"] = s.silhouette;
  j["davies_bouldin"] = s.davies_bouldin;
  j["degenerate"] = s.degenerate;
  if (!planted.empty()) {
    j["ari_vs_planted"] = metrics::adjusted_rand(planted, per_timestep);
  } else {
    j["ari_vs_planted"] = nullptr;
  }
  return j;
}

void copy_if_present(const fs::path& from, const fs::path& to, std::vector<std::string>& written) {
  if (!fs::is_regular_file(from)) return;
  write_text(to, read_text(from));
  written.push_back(to.filename().string());
}

}  // namespace

std::size_t thread_count() {
  const char* env = std::getenv("BXRL_THREADS");
  if (!env || !*env) return 1;
  char* end = nullptr;
  const long v = std::strtol(env, &end, 10);
  if (*end != '\0' || v < 1) fail(ErrorKind::kInvalidConfig, "BXRL_THREADS must be a positive integer");
  return static_cast<std::size_t>(v);
}

void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn) {
  const std::size_t workers = std::min(thread_count(), n);
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < n; i = next++) {
        try {
          fn(i);
        } catch (...) {
          std::lock_guard lock(error_mutex);
          if (!error) error = std::current_exception();
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  if (error) std::rethrow_exception(error);
}

Segmentation segment_tokens(const std::vector<vq::TokenSequence>& tokens, const vq::Codebook& codebook,
                            const SegmentConfig& cfg) {
  if (cfg.smoothing_window < 3 || cfg.smoothing_window % 2 == 0) {
    fail(ErrorKind::kInvalidWindow, "smoothing window must be odd and >= 3");
  }
  Segmentation s;
  s.graph = seg::build_graph(tokens, codebook, cfg.lambda, cfg.distance);
  s.decomposition = seg::spectral_decompose(s.graph);
  std::size_t k = cfg.k;
  if (k == 0) k = s.graph.size() == 2 ? 2 : seg::select_k(s.decomposition.eigenvalues);
  s.node_labels = seg::spectral_cluster(s.decomposition, k, cfg.seed);
  auto& a = s.assignment;
  a.k = k;
  for (std::size_t i = 0; i < s.graph.size(); ++i) a.token_to_cluster[s.graph.nodes[i]] = s.node_labels[i];
  s.unsmoothed = seg::label_timesteps(tokens, a.token_to_cluster);
  a.episodes = seg::smooth_labels(s.unsmoothed, cfg.smoothing_window);
  a.lambda = cfg.lambda;
  a.eigenvalues = s.decomposition.eigenvalues;
  return s;
}

std::vector<std::vector<attr::StateAction>> cluster_pairs(const data::Dataset& ds, const seg::EpisodeLabels& labels,
                                                          std::size_t k) {
  if (labels.size() != ds.trajectories.size()) {
    fail(ErrorKind::kLengthMismatch, "labels cover " + std::to_string(labels.size()) + " episodes, dataset has " +
                                         std::to_string(ds.trajectories.size()));
  }
  std::vector<std::vector<attr::StateAction>> out(k);
  for (std::size_t e = 0; e < labels.size(); ++e) {
    const auto& traj = ds.trajectories[e];
    if (labels[e].size() != traj.size()) {
      fail(ErrorKind::kLengthMismatch, "labels for episode " + std::to_string(e) + " have length " +
                                           std::to_string(labels[e].size()) + ", episode has " +
                                           std::to_string(traj.size()));
    }
    for (std::size_t t = 0; t < traj.size(); ++t) {
      const int l = labels[e][t];
      if (l < 0 || static_cast<std::size_t>(l) >= k) fail(ErrorKind::kParse, "label outside [0, k)");
      out[static_cast<std::size_t>(l)].push_back({traj.observations[t], traj.actions[t]});
    }
  }
  return out;
}

std::vector<attr::BcModel> train_cluster_models(const data::Dataset& ds, const seg::EpisodeLabels& smoothed,
                                                const seg::EpisodeLabels& unsmoothed, std::size_t k,
                                                const attr::BcConfig& cfg) {
  auto pairs = cluster_pairs(ds, smoothed, k);
  std::vector<std::vector<attr::StateAction>> fallback;
  for (std::size_t c = 0; c < k; ++c) {
    if (!pairs[c].empty()) continue;
    if (fallback.empty()) fallback = cluster_pairs(ds, unsmoothed, k);
    pairs[c] = fallback[c];
  }
  std::vector<std::optional<attr::BcModel>> slots(k);
  parallel_for(k, [&](std::size_t c) {
    attr::BcConfig local = cfg;
    local.seed = cfg.seed + 1 + c;
    slots[c].emplace(attr::train_bc(pairs[c], ds.obs_spec, ds.act_spec, local, "cluster_" + std::to_string(c)));
  });
  std::vector<attr::BcModel> out;
  out.reserve(k);
  for (auto& s : slots) out.push_back(std::move(*s));
  return out;
}

void structure_points(const vq::Codebook& codebook, const std::vector<vq::TokenSequence>& tokens,
                      const seg::ClusterAssignment& assignment, MetricSpace space, seg::Points& points,
                      std::vector<int>& labels) {
  points.clear();
  labels.clear();
  if (space == MetricSpace::kCodes) {
    std::vector<std::size_t> ids;
    points = metrics::appearing_codes(codebook, tokens, &ids);
    for (auto id : ids) {
      const auto it = assignment.token_to_cluster.find(id);
      if (it == assignment.token_to_cluster.end()) {
        fail(ErrorKind::kUnknownToken, "token " + std::to_string(id) + " has no cluster");
      }
      labels.push_back(it->second);
    }
    return;
  }
  for (const auto& seq : tokens) {
    if (seq.trajectory >= assignment.episodes.size() ||
        assignment.episodes[seq.trajectory].size() != seq.tokens.size()) {
      fail(ErrorKind::kLengthMismatch, "token sequence does not match cluster labels");
    }
    for (std::size_t t = 0; t < seq.tokens.size(); ++t) {
      const auto c = codebook.code(seq.tokens[t]);
      points.emplace_back(c.begin(), c.end());
      labels.push_back(assignment.episodes[seq.trajectory][t]);
    }
  }
}

std::vector<int> planted_modes(const data::Dataset& ds) {
  std::vector<int> out;
  for (const auto& t : ds.trajectories) {
    if (!t.mode_labels) return {};
    out.insert(out.end(), t.mode_labels->begin(), t.mode_labels->end());
  }
  return out;
}

std::vector<int> flatten(const seg::EpisodeLabels& labels) {
  std::vector<int> out;
  for (const auto& ep : labels) out.insert(out.end(), ep.begin(), ep.end());
  return out;
}

metrics::MetricsReport evaluate(const EvalInputs& in) {
  const auto& ds = *in.dataset;
  const auto codebook = in.model->codebook();
  metrics::MetricsReport r;
  const auto afs = metrics::average_fidelity(*in.policy, *in.clusters, in.assignment->episodes, ds, in.samples);
  r.afs_attributed = afs.attributed;
  r.afs_random = afs.random;
  r.afs_samples = afs.samples;
  seg::Points points;
  std::vector<int> labels;
  structure_points(codebook, *in.tokens, *in.assignment, in.space, points, labels);
  const auto structure = metrics::score_structure(points, labels);
  r.silhouette = structure.silhouette;
  r.davies_bouldin = structure.davies_bouldin;
  r.occupancy = in.occupancy;
  r.normalized_recon = vq::normalized_recon_loss(*in.model, ds);
  const auto planted = planted_modes(ds);
  if (!planted.empty()) r.ari_vs_planted = metrics::adjusted_rand(planted, flatten(in.assignment->episodes));
  r.config["lambda"] = in.assignment->lambda;
  r.config["num_codes"] = codebook.size();
  r.config["k"] = in.assignment->k;
  r.config["space"] = space_name(in.space);
  r.config["num_timesteps"] = ds.total_steps();
  r.config["structure_points"] = points.size();
  r.config["afs_requested"] = in.samples.episodes * in.samples.actions_per_episode;
  r.config["afs_samples"] = afs.samples;
  return r;
}

std::vector<LambdaRow> sweep_lambda(const std::vector<vq::TokenSequence>& tokens, const vq::Codebook& codebook,
                                    const std::vector<double>& grid, const SegmentConfig& base, MetricSpace space) {
  std::vector<LambdaRow> rows(grid.size());
  parallel_for(grid.size(), [&](std::size_t i) {
    LambdaRow& row = rows[i];
    row.lambda = grid[i];
    SegmentConfig cfg = base;
    cfg.lambda = grid[i];
    try {
      const auto s = segment_tokens(tokens, codebook, cfg);
      seg::Points points;
      std::vector<int> labels;
      structure_points(codebook, tokens, s.assignment, space, points, labels);
      const auto scores = metrics::score_structure(points, labels);
      row.k = s.assignment.k;
      row.silhouette = scores.silhouette;
      row.davies_bouldin = scores.davies_bouldin;
      row.ok = true;
    } catch (const Error& e) {
      if (e.kind() == ErrorKind::kInvalidLambda) throw;
      row.error = std::string(error_kind_name(e.kind()));
    }
  });
  return rows;
}

std::vector<CodebookRow> sweep_codebook(const data::Dataset& ds, const vq::TrainConfig& base,
                                        const std::vector<std::size_t>& sizes,
                                        const std::vector<std::uint64_t>& seeds) {
  if (sizes.empty() || seeds.empty()) fail(ErrorKind::kInvalidConfig, "codebook sweep needs sizes and seeds");
  std::vector<CodebookRow> rows(sizes.size() * seeds.size());
  parallel_for(rows.size(), [&](std::size_t i) {
    vq::TrainConfig cfg = base;
    cfg.model.num_codes = sizes[i / seeds.size()];
    cfg.seed = seeds[i % seeds.size()];
    auto result = vq::train_vqvae(ds, cfg);
    rows[i] = {cfg.model.num_codes, cfg.seed, vq::normalized_recon_loss(result.model, ds),
               result.curve.final_occupancy};
  });
  return rows;
}

nlohmann::ordered_json gen_data_stage(const DataSource& source, const fs::path& out) {
  DataSource s = source;
  s.path.clear();
  const auto ds = load_or_generate(s);
  data::save_dataset(ds, out);
  nlohmann::ordered_json status;
  status["command"] = "gen-data";
  status["out"] = out.string();
  status["env"] = s.env;
  status["episodes"] = ds.trajectories.size();
  status["steps"] = ds.total_steps();
  status["data_hash"] = dataset_hash(ds);
  return status;
}

nlohmann::ordered_json train_vqvae_stage(const fs::path& data, const vq::TrainConfig& cfg, const fs::path& out_ckpt) {
  cfg.validate();
  const auto ds = data::load_dataset(data);
  const std::string dh = dataset_hash(ds);
  auto result = vq::train_vqvae(ds, cfg);
  const auto train_json = vq::train_config_to_json(cfg);
  const Lineage lineage{lineage_hash("vqvae", train_json.dump(), dh), dh, dh};
  nlohmann::ordered_json meta;
  put_lineage(meta, lineage);
  meta["train"] = train_json;
  meta["curve"] = vq::curve_to_json(result.curve);
  ad::write_checkpoint(result.model.to_checkpoint(meta), out_ckpt);
  nlohmann::ordered_json status;
  status["command"] = "train-vqvae";
  status["out"] = out_ckpt.string();
  status["config_hash"] = lineage.config_hash;
  status["epochs"] = result.curve.epochs.size();
  status["final_recon_loss"] = result.curve.epochs.back().recon_loss;
  status["final_occupancy"] = result.curve.final_occupancy;
  return status;
}

nlohmann::ordered_json tokenize_stage(const fs::path& ckpt, const fs::path& data, const fs::path& out) {
  const auto chain = load_chain(data, ckpt, nullptr, nullptr);
  const auto model = vq::VqVaeModel::from_checkpoint(chain.checkpoint);
  TokenFile file;
  file.lineage = {lineage_hash("tokens", "", chain.ckpt_lineage.config_hash), chain.ckpt_lineage.config_hash,
                  chain.data_hash};
  file.num_codes = model.config().num_codes;
  file.sequences = vq::tokenize(model, chain.dataset);
  write_json(out, tokens_to_json(file));
  std::set<std::size_t> used;
  for (const auto& s : file.sequences) used.insert(s.tokens.begin(), s.tokens.end());
  nlohmann::ordered_json status;
  status["command"] = "tokenize";
  status["out"] = out.string();
  status["config_hash"] = file.lineage.config_hash;
  status["trajectories"] = file.sequences.size();
  status["distinct_tokens"] = used.size();
  return status;
}

nlohmann::ordered_json segment_stage(const fs::path& tokens, const fs::path& ckpt, const SegmentConfig& cfg,
                                     const fs::path& out) {
  if (!(cfg.lambda >= 0.0 && cfg.lambda <= 1.0)) {
    fail(ErrorKind::kInvalidLambda, "lambda must lie in [0, 1], got " + format_number(cfg.lambda));
  }
  const auto token_file = tokens_from_json(read_json(tokens));
  const auto checkpoint = ad::read_checkpoint(ckpt);
  const auto ckpt_lineage = lineage_from_json(checkpoint.metadata, "checkpoint " + ckpt.string());
  require_parent(token_file.lineage, ckpt_lineage.config_hash, "token file " + tokens.string());
  const auto model = vq::VqVaeModel::from_checkpoint(checkpoint);
  const auto s = segment_tokens(token_file.sequences, model.codebook(), cfg);
  ClusterFile file;
  const auto settings = segment_config_to_json(cfg);
  file.lineage = {lineage_hash("segment", settings.dump(), token_file.lineage.config_hash),
                  token_file.lineage.config_hash, token_file.lineage.data_hash};
  file.assignment = s.assignment;
  file.unsmoothed = s.unsmoothed;
  file.settings = settings;
  write_json(out, clusters_to_json(file));
  nlohmann::ordered_json status;
  status["command"] = "segment";
  status["out"] = out.string();
  status["config_hash"] = file.lineage.config_hash;
  status["k"] = s.assignment.k;
  status["nodes"] = s.graph.size();
  return status;
}

nlohmann::ordered_json train_bc_stage(const fs::path& data, const fs::path& labels, const attr::BcConfig& cfg,
                                      const fs::path& out_dir) {
  cfg.validate();
  const auto ds = data::load_dataset(data);
  const std::string dh = dataset_hash(ds);
  const auto clusters = clusters_from_json(read_json(labels));
  require_data(clusters.lineage, dh, "cluster file " + labels.string());
  const auto bc_json = attr::bc_config_to_json(cfg);

  const auto all = attr::all_pairs(ds);
  const auto policy = attr::train_bc(all, ds.obs_spec, ds.act_spec, cfg, "policy");
  const auto models = train_cluster_models(ds, clusters.assignment.episodes, clusters.unsmoothed,
                                           clusters.assignment.k, cfg);

  fs::create_directories(out_dir);
  const Lineage policy_lineage{lineage_hash("policy", bc_json.dump(), dh), dh, dh};
  nlohmann::ordered_json policy_meta;
  put_lineage(policy_meta, policy_lineage);
  ad::write_checkpoint(policy.to_checkpoint(policy_meta), out_dir / "policy.bxrl");

  const Lineage lineage{lineage_hash("bc", bc_json.dump(), clusters.lineage.config_hash),
                        clusters.lineage.config_hash, dh};
  nlohmann::ordered_json manifest;
  put_lineage(manifest, lineage);
  manifest["k"] = models.size();
  manifest["policy"] = "policy.bxrl";
  manifest["bc"] = bc_json;
  std::vector<std::string> files;
  std::vector<std::size_t> samples;
  for (std::size_t c = 0; c < models.size(); ++c) {
    const std::string name = "cluster_" + std::to_string(c) + ".bxrl";
    nlohmann::ordered_json meta;
    put_lineage(meta, lineage);
    ad::write_checkpoint(models[c].to_checkpoint(meta), out_dir / name);
    files.push_back(name);
    samples.push_back(models[c].train_samples());
  }
  manifest["clusters"] = files;
  manifest["samples"] = samples;
  manifest["policy_samples"] = policy.train_samples();
  write_json(out_dir / "manifest.json", manifest);

  nlohmann::ordered_json status;
  status["command"] = "train-bc";
  status["out"] = out_dir.string();
  status["config_hash"] = lineage.config_hash;
  status["k"] = models.size();
  status["samples"] = samples;
  return status;
}

nlohmann::ordered_json attribute_stage(const fs::path& policy, const fs::path& bc_dir, const fs::path& data,
                                       const attr::SampleSpec& spec, const fs::path& out) {
  const auto ds = data::load_dataset(data);
  const auto models = load_bc_dir(bc_dir, policy, dataset_hash(ds));
  const auto result = attr::attribute_dataset(models.policy, models.clusters, ds, spec);
  const std::string hash = lineage_hash("attribute", sample_spec_json(spec).dump(), models.lineage.config_hash);
  write_text(out, hash_comment(hash) + attr::attribution_csv(result));
  std::vector<std::size_t> counts(result.num_clusters, 0);
  for (const auto& r : result.records) ++counts[static_cast<std::size_t>(r.k_star)];
  nlohmann::ordered_json status;
  status["command"] = "attribute";
  status["out"] = out.string();
  status["config_hash"] = hash;
  status["records"] = result.records.size();
  status["attributed_counts"] = counts;
  return status;
}

nlohmann::ordered_json evaluate_stage(const EvaluatePaths& paths, const attr::SampleSpec& spec, MetricSpace space,
                                      const fs::path& out) {
  const auto chain = load_chain(paths.data, paths.ckpt, &paths.tokens, &paths.labels);
  const auto models = load_bc_dir(paths.bc_dir, paths.bc_dir / "policy.bxrl", chain.data_hash);
  require_parent(models.lineage, chain.clusters.lineage.config_hash, "model manifest");
  if (models.clusters.size() != chain.clusters.assignment.k) {
    fail(ErrorKind::kStaleArtifact, "model directory holds " + std::to_string(models.clusters.size()) +
                                        " cluster models, cluster file has k = " +
                                        std::to_string(chain.clusters.assignment.k));
  }
  const auto model = vq::VqVaeModel::from_checkpoint(chain.checkpoint);
  EvalInputs in;
  in.dataset = &chain.dataset;
  in.model = &model;
  in.occupancy = chain.checkpoint.metadata.at("curve").at("final_occupancy").get<double>();
  in.tokens = &chain.tokens.sequences;
  in.assignment = &chain.clusters.assignment;
  in.policy = &models.policy;
  in.clusters = &models.clusters;
  in.samples = spec;
  in.space = space;
  auto report = evaluate(in);
  const std::string hash = lineage_hash("evaluate", sample_spec_json(spec).dump() + space_name(space),
                                        models.lineage.config_hash);
  report.config["seeds"] = {{"vqvae", chain.checkpoint.metadata.at("train").at("seed")},
                            {"segment", chain.clusters.settings.value("seed", std::uint64_t{0})},
                            {"bc", models.manifest.at("bc").at("seed")},
                            {"metrics", spec.seed}};
  report.config["sample_counts"] = {{"policy", models.manifest.at("policy_samples")},
                                    {"clusters", models.manifest.at("samples")}};
  report.config["config_hash"] = hash;
  write_json(out, metrics::report_to_json(report));
  fs::path csv = out;
  csv.replace_extension(".csv");
  write_text(csv, hash_comment(hash) + metrics::report_csv_header() + "\n" + metrics::report_csv_row(report) + "\n");
  nlohmann::ordered_json status;
  status["command"] = "evaluate";
  status["out"] = out.string();
  status["config_hash"] = hash;
  status["report"] = metrics::report_to_json(report);
  status["report"].erase("config");
  return status;
}

nlohmann::ordered_json baselines_stage(const EvaluatePaths& paths, MetricSpace space, std::uint64_t seed,
                                       const fs::path& out) {
  const auto chain = load_chain(paths.data, paths.ckpt, &paths.tokens, &paths.labels);
  const auto model = vq::VqVaeModel::from_checkpoint(chain.checkpoint);
  const auto codebook = model.codebook();
  const auto& assignment = chain.clusters.assignment;
  const auto& tokens = chain.tokens.sequences;
  const auto planted = planted_modes(chain.dataset);

  seg::Points points;
  std::vector<int> labels;
  structure_points(codebook, tokens, assignment, space, points, labels);
  const auto pipeline_scores = metrics::score_structure(points, labels);

  std::vector<std::size_t> ids;
  metrics::appearing_codes(codebook, tokens, &ids);
  const auto latent = metrics::kmeans_latent_baseline(codebook, tokens, assignment.k, seed);
  std::map<std::size_t, int> latent_map;
  for (std::size_t i = 0; i < ids.size(); ++i) latent_map[ids[i]] = latent.labels[i];
  seg::ClusterAssignment latent_assignment = assignment;
  latent_assignment.token_to_cluster = latent_map;
  const auto latent_unsmoothed = seg::label_timesteps(tokens, latent_map);
  const std::size_t window = chain.clusters.settings.value("smoothing_window", std::size_t{5});
  latent_assignment.episodes = seg::smooth_labels(latent_unsmoothed, window);
  structure_points(codebook, tokens, latent_assignment, space, points, labels);
  const auto latent_scores = metrics::score_structure(points, labels);

  const auto raw = metrics::raw_pair_baseline(chain.dataset, assignment.k, seed);

  const std::string hash =
      lineage_hash("baselines", std::to_string(seed) + space_name(space), chain.clusters.lineage.config_hash);
  nlohmann::ordered_json j;
  put_lineage(j, {hash, chain.clusters.lineage.config_hash, chain.data_hash});
  j["k"] = assignment.k;
  j["space"] = space_name(space);
  j["seed"] = seed;
  j["spectral"] = structure_json(pipeline_scores, planted, flatten(assignment.episodes));
  j["kmeans_latent"] = structure_json(latent_scores, planted, flatten(latent_assignment.episodes));
  j["raw_pair"] = structure_json(raw, planted, raw.labels);
  write_json(out, j);
  nlohmann::ordered_json status;
  status["command"] = "baselines";
  status["out"] = out.string();
  status["config_hash"] = hash;
  status["spectral_silhouette"] = pipeline_scores.silhouette;
  status["kmeans_latent_silhouette"] = latent_scores.silhouette;
  status["raw_pair_silhouette"] = raw.silhouette;
  return status;
}

nlohmann::ordered_json sweep_lambda_stage(const fs::path& data, const fs::path& ckpt, const std::vector<double>& grid,
                                          const SegmentConfig& base, MetricSpace space, const fs::path& out_dir) {
  if (grid.empty()) fail(ErrorKind::kInvalidConfig, "lambda grid is empty");
  for (double l : grid) {
    if (!(l >= 0.0 && l <= 1.0)) fail(ErrorKind::kInvalidLambda, "lambda must lie in [0, 1], got " + format_number(l));
  }
  const auto chain = load_chain(data, ckpt, nullptr, nullptr);
  const auto model = vq::VqVaeModel::from_checkpoint(chain.checkpoint);
  const auto tokens = vq::tokenize(model, chain.dataset);
  const auto rows = sweep_lambda(tokens, model.codebook(), grid, base, space);

  std::string grid_text;
  for (double l : grid) grid_text += format_number(l) + ",";
  const std::string hash = lineage_hash("sweep-lambda", segment_config_to_json(base).dump() + grid_text +
                                                            space_name(space),
                                        chain.ckpt_lineage.config_hash);
  std::string csv = hash_comment(hash) + "lambda,k,silhouette,davies_bouldin,status\n";
  Series ss{"silhouette", {}, {}}, db{"davies_bouldin", {}, {}};
  for (const auto& r : rows) {
    if (r.ok) {
      csv += format_number(r.lambda) + "," + std::to_string(r.k) + "," + format_number(r.silhouette) + "," +
             format_number(r.davies_bouldin) + ",ok\n";
      ss.xs.push_back(r.lambda);
      ss.ys.push_back(r.silhouette);
      db.xs.push_back(r.lambda);
      db.ys.push_back(r.davies_bouldin);
    } else {
      csv += format_number(r.lambda) + ",,,," + r.error + "\n";
    }
  }
  write_text(out_dir / "sweep_lambda.csv", csv);
  write_text(out_dir / "sweep_lambda.svg",
             line_plot("Clustering quality across lambda", "lambda", "score", {ss, db}));
  nlohmann::ordered_json status;
  status["command"] = "sweep-lambda";
  status["out"] = out_dir.string();
  status["config_hash"] = hash;
  status["rows"] = rows.size();
  return status;
}

nlohmann::ordered_json sweep_codebook_stage(const fs::path& data, const vq::TrainConfig& base,
                                            const std::vector<std::size_t>& sizes,
                                            const std::vector<std::uint64_t>& seeds, const fs::path& out_dir) {
  for (auto n : sizes) {
    if (n < 2) fail(ErrorKind::kInvalidConfig, "codebook sizes must be >= 2");
  }
  const auto ds = data::load_dataset(data);
  const std::string dh = dataset_hash(ds);
  const auto rows = sweep_codebook(ds, base, sizes, seeds);
  std::string payload = vq::train_config_to_json(base).dump();
  for (auto n : sizes) payload += "," + std::to_string(n);
  payload += ";";
  for (auto s : seeds) payload += "," + std::to_string(s);
  const std::string hash = lineage_hash("sweep-codebook", payload, dh);

  std::string csv = hash_comment(hash) + "num_codes,seed,normalized_recon,occupancy\n";
  for (const auto& r : rows) {
    csv += std::to_string(r.num_codes) + "," + std::to_string(r.seed) + "," + format_number(r.normalized_recon) +
           "," + format_number(r.occupancy) + "\n";
  }
  Series recon{"normalized reconstruction loss", {}, {}}, occ{"codebook occupancy", {}, {}};
  for (std::size_t i = 0; i < sizes.size(); ++i) {
    double rl = 0.0, oc = 0.0;
    for (std::size_t s = 0; s < seeds.size(); ++s) {
      rl += rows[i * seeds.size() + s].normalized_recon;
      oc += rows[i * seeds.size() + s].occupancy;
    }
    recon.xs.push_back(static_cast<double>(sizes[i]));
    recon.ys.push_back(rl / static_cast<double>(seeds.size()));
    occ.xs.push_back(static_cast<double>(sizes[i]));
    occ.ys.push_back(oc / static_cast<double>(seeds.size()));
  }
  write_text(out_dir / "sweep_codebook.csv", csv);
  write_text(out_dir / "sweep_codebook.svg",
             line_plot("Codebook size analysis", "codebook size N", "value (mean over seeds)", {recon, occ}));
  nlohmann::ordered_json status;
  status["command"] = "sweep-codebook";
  status["out"] = out_dir.string();
  status["config_hash"] = hash;
  status["rows"] = rows.size();
  return status;
}

nlohmann::ordered_json report_stage(const fs::path& run_dir, const fs::path& out_dir) {
  if (!fs::is_directory(run_dir)) fail(ErrorKind::kIo, "run directory does not exist: " + run_dir.string());
  fs::create_directories(out_dir);
  std::vector<std::string> written;
  for (const char* name : {"metrics.json", "metrics.csv", "attribution.csv", "baselines.json", "sweep_lambda.csv",
                           "sweep_lambda.svg", "sweep_codebook.csv", "sweep_codebook.svg"}) {
    copy_if_present(run_dir / name, out_dir / name, written);
  }
  if (fs::is_regular_file(run_dir / "baselines.json")) {
    const auto b = read_json(run_dir / "baselines.json");
    std::string csv = hash_comment(b.at("config_hash").get<std::string>()) +
                      "method,silhouette,davies_bouldin,ari_vs_planted\n";
    for (const char* method : {"spectral", "kmeans_latent", "raw_pair"}) {
      const auto& m = b.at(method);
      csv += std::string(method) + "," + format_number(m.at("silhouette").get<double>()) + "," +
             format_number(m.at("davies_bouldin").get<double>()) + "," +
             (m.at("ari_vs_planted").is_null() ? "" : format_number(m.at("ari_vs_planted").get<double>())) + "\n";
    }
    write_text(out_dir / "structure_table.csv", csv);
    written.push_back("structure_table.csv");
  }
  std::size_t rects = 0;
  if (fs::is_regular_file(run_dir / "clusters.json")) {
    const auto clusters = clusters_from_json(read_json(run_dir / "clusters.json"));
    write_text(out_dir / "labels.svg", label_strips(clusters.assignment.episodes, "Behavior clusters per timestep"));
    written.push_back("labels.svg");
    for (const auto& ep : clusters.assignment.episodes) rects += ep.size();
  }
  if (fs::is_regular_file(run_dir / "dataset.jsonl")) {
    const auto ds = data::load_dataset(run_dir / "dataset.jsonl");
    seg::EpisodeLabels planted;
    for (const auto& t : ds.trajectories) {
      if (!t.mode_labels) {
        planted.clear();
        break;
      }
      planted.push_back(*t.mode_labels);
    }
    if (!planted.empty()) {
      write_text(out_dir / "planted_modes.svg", label_strips(planted, "Planted modes per timestep"));
      written.push_back("planted_modes.svg");
    }
  }
  if (written.empty()) fail(ErrorKind::kIo, "no run artifacts found in " + run_dir.string());
  std::sort(written.begin(), written.end());
  nlohmann::ordered_json index;
  index["files"] = written;
  write_json(out_dir / "index.json", index);
  nlohmann::ordered_json status;
  status["command"] = "report";
  status["out"] = out_dir.string();
  status["files"] = written;
  status["label_rects"] = rects;
  return status;
}

nlohmann::ordered_json run_stage(const PipelineConfig& cfg) {
  const fs::path dir = cfg.output_dir;
  fs::create_directories(dir);
  write_text(dir / "config.toml", config_to_text(cfg));
  nlohmann::ordered_json stages = nlohmann::ordered_json::array();
  fs::path data = cfg.data.path;
  if (data.empty()) {
    data = dir / "dataset.jsonl";
    stages.push_back(gen_data_stage(cfg.data, data));
  }
  const EvaluatePaths paths{data, dir / "vqvae.bxrl", dir / "tokens.json", dir / "clusters.json", dir / "bc"};
  stages.push_back(train_vqvae_stage(data, cfg.vqvae, paths.ckpt));
  stages.push_back(tokenize_stage(paths.ckpt, data, paths.tokens));
  stages.push_back(segment_stage(paths.tokens, paths.ckpt, cfg.segment, paths.labels));
  stages.push_back(train_bc_stage(data, paths.labels, cfg.bc, paths.bc_dir));
  stages.push_back(attribute_stage(paths.bc_dir / "policy.bxrl", paths.bc_dir, data, cfg.metrics,
                                   dir / "attribution.csv"));
  stages.push_back(evaluate_stage(paths, cfg.metrics, cfg.metric_space, dir / "metrics.json"));
  stages.push_back(baselines_stage(paths, cfg.metric_space, cfg.segment.seed, dir / "baselines.json"));
  stages.push_back(sweep_lambda_stage(data, paths.ckpt, cfg.sweep.lambda_grid, cfg.segment, cfg.metric_space, dir));
  if (!cfg.sweep.codebook_sizes.empty()) {
    stages.push_back(sweep_codebook_stage(data, cfg.vqvae, cfg.sweep.codebook_sizes, cfg.sweep.codebook_seeds, dir));
  }
  stages.push_back(report_stage(dir, dir / "report"));
  nlohmann::ordered_json status;
  status["command"] = "run";
  status["out"] = dir.string();
  status["stages"] = nlohmann::ordered_json::array();
  for (const auto& s : stages) status["stages"].push_back(s.at("command"));
  status["metrics"] = metrics::report_to_json(metrics::report_from_json(read_json(dir / "metrics.json")));
  status["metrics"].erase("config");
  return status;
}

}  // namespace bexrl::pipeline
