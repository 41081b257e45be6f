#include "bexrl/vq/model.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "bexrl/ad/ops.hpp"
#include "bexrl/util/error.hpp"

namespace bexrl::vq {

using ad::Tensor;
using ad::Var;

void ModelConfig::validate() const {
  if (embed_dim < 2) fail(ErrorKind::kInvalidConfig, "embed_dim must be >= 2");
  if (num_layers < 1) fail(ErrorKind::kInvalidConfig, "num_layers must be >= 1");
  if (num_heads < 1 || embed_dim % num_heads != 0) {
    fail(ErrorKind::kInvalidConfig, "embed_dim must be divisible by num_heads");
  }
  if (hidden_dim < 1) fail(ErrorKind::kInvalidConfig, "hidden_dim must be >= 1");
  if (num_codes < 2) fail(ErrorKind::kInvalidConfig, "num_codes must be >= 2");
  if (seq_len < 2) fail(ErrorKind::kInvalidConfig, "seq_len must be >= 2");
}

nlohmann::ordered_json model_config_to_json(const ModelConfig& cfg) {
  nlohmann::ordered_json j;
  j["embed_dim"] = cfg.embed_dim;
  j["num_layers"] = cfg.num_layers;
  j["num_heads"] = cfg.num_heads;
  j["hidden_dim"] = cfg.hidden_dim;
  j["num_codes"] = cfg.num_codes;
  j["seq_len"] = cfg.seq_len;
  j["fusion"] = cfg.fusion == Fusion::kSum ? "sum" : "concat";
  return j;
}

ModelConfig model_config_from_json(const nlohmann::json& j) {
  ModelConfig cfg;
  cfg.embed_dim = j.at("embed_dim").get<std::size_t>();
  cfg.num_layers = j.at("num_layers").get<std::size_t>();
  cfg.num_heads = j.at("num_heads").get<std::size_t>();
  cfg.hidden_dim = j.at("hidden_dim").get<std::size_t>();
  cfg.num_codes = j.at("num_codes").get<std::size_t>();
  cfg.seq_len = j.at("seq_len").get<std::size_t>();
  cfg.fusion = j.at("fusion").get<std::string>() == "concat" ? Fusion::kConcat : Fusion::kSum;
  cfg.validate();
  return cfg;
}

VqVaeModel::VqVaeModel(data::ObservationSpec obs_spec, data::ActionSpec act_spec, ModelConfig cfg,
                       std::uint64_t seed)
    : obs_spec_(obs_spec), act_spec_(act_spec), cfg_(cfg), seed_(seed) {
  cfg_.validate();
  std::mt19937_64 rng(seed);
  const std::size_t obs_dim = obs_spec_.flat_size();
  const std::size_t act_dim = act_spec_.encoded_size();
  const std::size_t d = cfg_.embed_dim;

  obs_mean_ = params_.add("norm.obs_mean", Tensor({obs_dim}, 0.0), false);
  obs_std_ = params_.add("norm.obs_std", Tensor({obs_dim}, 1.0), false);
  positions_ = ad::sinusoidal_positions(cfg_.seq_len, d);

  if (cfg_.fusion == Fusion::kSum) {
    obs_embed_ = ad::Linear(params_, "enc.obs_embed", obs_dim, d, rng);
    act_embed_ = ad::Linear(params_, "enc.act_embed", act_dim, d, rng);
  } else {
    pair_embed_ = ad::Linear(params_, "enc.pair_embed", obs_dim + act_dim, d, rng);
  }
  for (std::size_t l = 0; l < cfg_.num_layers; ++l) {
    encoder_.emplace_back(params_, "enc.block" + std::to_string(l), d, cfg_.num_heads, cfg_.hidden_dim, rng);
  }
  encoder_norm_ = ad::LayerNorm(params_, "enc.norm", d);
  latent_proj_ = ad::Linear(params_, "enc.latent", d, d, rng);

  std::normal_distribution<double> code_init(0.0, 1.0);
  Tensor codes({cfg_.num_codes, d}, 0.0);
  for (auto& v : codes.values()) v = code_init(rng);
  codebook_ = params_.add("codebook", std::move(codes));

  code_embed_ = ad::Linear(params_, "dec.code_embed", d, d, rng);
  dec_obs_embed_ = ad::Linear(params_, "dec.obs_embed", obs_dim, d, rng);
  for (std::size_t l = 0; l < cfg_.num_layers; ++l) {
    decoder_.emplace_back(params_, "dec.block" + std::to_string(l), d, cfg_.num_heads, cfg_.hidden_dim, rng);
  }
  decoder_norm_ = ad::LayerNorm(params_, "dec.norm", d);
  head_ = ad::Linear(params_, "dec.head", d, obs_dim, rng);
}

void VqVaeModel::set_codebook(const Tensor& codes) {
  if (codes.shape() != codebook_.value().shape()) {
    fail(ErrorKind::kShape, "set_codebook: " + ad::shape_str(codes.shape()) + " vs " +
                                ad::shape_str(codebook_.shape()));
  }
  codebook_.mutable_value() = codes;
}

void VqVaeModel::set_normalization(std::span<const double> mean, std::span<const double> stddev) {
  const std::size_t n = obs_spec_.flat_size();
  if (mean.size() != n || stddev.size() != n) fail(ErrorKind::kDimMismatch, "normalization size mismatch");
  obs_mean_.mutable_value() = Tensor::vector(mean);
  obs_std_.mutable_value() = Tensor::vector(stddev);
}

std::vector<Window> VqVaeModel::make_windows(const data::Dataset& ds) const {
  if (ds.obs_spec != obs_spec_ || ds.act_spec != act_spec_) {
    fail(ErrorKind::kSpecMismatch, "dataset specs do not match the model");
  }
  const std::size_t obs_dim = obs_spec_.flat_size();
  const std::size_t act_dim = act_spec_.encoded_size();
  const auto mean = obs_mean();
  const auto sd = obs_std();
  std::vector<Window> windows;
  std::vector<double> enc;
  for (std::size_t ti = 0; ti < ds.trajectories.size(); ++ti) {
    const auto& traj = ds.trajectories[ti];
    const std::size_t len = traj.size();
    for (std::size_t start = 0; start < len; start += cfg_.seq_len) {
      const std::size_t t_len = std::min(cfg_.seq_len, len - start);
      Window w;
      w.trajectory = ti;
      w.start = start;
      w.observations = Tensor({t_len, obs_dim}, 0.0);
      w.actions = Tensor({t_len, act_dim}, 0.0);
      std::vector<double> targets;
      for (std::size_t t = 0; t < t_len; ++t) {
        const auto& o = traj.observations[start + t];
        for (std::size_t c = 0; c < obs_dim; ++c) w.observations.at(t, c) = (o[c] - mean[c]) / sd[c];
        enc.clear();
        data::encode_action(act_spec_, traj.actions[start + t], enc);
        for (std::size_t c = 0; c < act_dim; ++c) w.actions.at(t, c) = enc[c];
        if (start + t + 1 < len) {
          w.target_rows.push_back(t);
          const auto& next = traj.observations[start + t + 1];
          for (std::size_t c = 0; c < obs_dim; ++c) targets.push_back((next[c] - mean[c]) / sd[c]);
        }
      }
      if (!w.target_rows.empty()) {
        w.targets = Tensor({w.target_rows.size(), obs_dim}, std::move(targets));
      }
      windows.push_back(std::move(w));
    }
  }
  return windows;
}

Var VqVaeModel::positions(std::size_t length) const {
  Tensor p({length, cfg_.embed_dim}, 0.0);
  for (std::size_t t = 0; t < length; ++t)
    for (std::size_t c = 0; c < cfg_.embed_dim; ++c) p.at(t, c) = positions_.at(t, c);
  return Var::constant(std::move(p));
}

Var VqVaeModel::encode(const Window& w) const {
  const std::size_t len = w.length();
  if (len > cfg_.seq_len) fail(ErrorKind::kShape, "window longer than seq_len");
  const Var obs = Var::constant(w.observations);
  const Var act = Var::constant(w.actions);
  Var x = cfg_.fusion == Fusion::kSum ? ad::add(obs_embed_(obs), act_embed_(act))
                                      : pair_embed_(ad::concat_cols({obs, act}));
  x = ad::add(x, positions(len));
  const ad::Mask mask = ad::causal_mask(len);
  for (const auto& block : encoder_) x = block(x, mask);
  return latent_proj_(encoder_norm_(x));
}

Var VqVaeModel::decode(const Var& quantized, const Tensor& obs_inputs) const {
  const std::size_t len = obs_inputs.dim(0);
  Var x = ad::add(code_embed_(quantized), dec_obs_embed_(Var::constant(obs_inputs)));
  x = ad::add(x, positions(len));
  const ad::Mask mask = ad::causal_mask(len);
  for (const auto& block : decoder_) x = block(x, mask);
  return head_(decoder_norm_(x));
}

ForwardResult VqVaeModel::forward(const Window& w, double teacher_forcing, std::mt19937_64* rng) const {
  ForwardResult r;
  r.latent = encode(w);
  const Codebook cb = codebook();
  const std::size_t len = w.length();
  r.tokens.resize(len);
  for (std::size_t t = 0; t < len; ++t) r.tokens[t] = quantize(r.latent.value().row(t), cb).index;
  r.code = ad::embedding_lookup(codebook_, r.tokens);
  const Var quantized = straight_through(r.latent, r.code);

  Var pred = decode(quantized, w.observations);
  if (teacher_forcing < 1.0) {
    // Autoregressive rollout: an input chosen for prediction is the decoder's
    // own estimate of s_t given the already mixed inputs before it. Row 0
    // always keeps ground truth.
    Tensor mixed = w.observations;
    const Tensor& codes = quantized.value();
    const std::size_t cols = mixed.cols();
    Tensor rollout = pred.value();
    bool stale = false;
    std::uniform_real_distribution<double> coin(0.0, 1.0);
    for (std::size_t t = 1; t < len; ++t) {
      const bool use_truth = rng ? coin(*rng) < teacher_forcing : false;
      if (use_truth) continue;
      if (stale) {
        Tensor prefix_codes({t, codes.cols()}, 0.0);
        Tensor prefix_obs({t, cols}, 0.0);
        for (std::size_t i = 0; i < t; ++i) {
          std::copy_n(codes.row(i).begin(), codes.cols(), prefix_codes.row(i).begin());
          std::copy_n(mixed.row(i).begin(), cols, prefix_obs.row(i).begin());
        }
        rollout = decode(Var::constant(std::move(prefix_codes)), prefix_obs).value();
        stale = false;
      }
      std::copy_n(rollout.row(t - 1).begin(), cols, mixed.row(t).begin());
      stale = true;
    }
    pred = decode(quantized, mixed);
  }
  r.prediction = pred;
  return r;
}

std::vector<std::size_t> VqVaeModel::tokens(const Window& w) const {
  const Var z = encode(w);
  const Codebook cb = codebook();
  std::vector<std::size_t> out(w.length());
  for (std::size_t t = 0; t < out.size(); ++t) out[t] = quantize(z.value().row(t), cb).index;
  return out;
}

ad::Checkpoint VqVaeModel::to_checkpoint(nlohmann::ordered_json extra_metadata) const {
  ad::Checkpoint ckpt;
  ckpt.metadata["kind"] = "vqvae";
  ckpt.metadata["obs_spec"] = data::obs_spec_to_json(obs_spec_);
  ckpt.metadata["act_spec"] = data::act_spec_to_json(act_spec_);
  ckpt.metadata["model"] = model_config_to_json(cfg_);
  ckpt.metadata["init_seed"] = seed_;
  for (auto& [k, v] : extra_metadata.items()) ckpt.metadata[k] = v;
  ckpt.tensors = params_.snapshot();
  return ckpt;
}

VqVaeModel VqVaeModel::from_checkpoint(const ad::Checkpoint& ckpt) {
  const auto& meta = ckpt.metadata;
  if (meta.value("kind", "") != "vqvae") fail(ErrorKind::kSpecMismatch, "checkpoint is not a VQ-VAE model");
  VqVaeModel model(data::obs_spec_from_json(meta.at("obs_spec")), data::act_spec_from_json(meta.at("act_spec")),
                   model_config_from_json(meta.at("model")), meta.at("init_seed").get<std::uint64_t>());
  model.params_.assign(ckpt.tensors);
  return model;
}

std::vector<TokenSequence> tokenize(const VqVaeModel& model, const data::Dataset& ds) {
  std::vector<TokenSequence> out(ds.trajectories.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i].trajectory = i;
  for (const auto& w : model.make_windows(ds)) {
    const auto toks = model.tokens(w);
    auto& seq = out[w.trajectory].tokens;
    seq.insert(seq.end(), toks.begin(), toks.end());
  }
  return out;
}

double normalized_recon_loss(const VqVaeModel& model, const data::Dataset& ds) {
  const std::size_t obs_dim = model.obs_spec().flat_size();
  const auto mean = model.obs_mean();
  const auto sd = model.obs_std();
  std::vector<double> preds, targets, variance(obs_dim);
  for (std::size_t c = 0; c < obs_dim; ++c) variance[c] = sd[c] * sd[c];
  std::size_t rows = 0;
  for (const auto& w : model.make_windows(ds)) {
    if (w.target_rows.empty()) continue;
    const ForwardResult r = model.forward(w, 0.0, nullptr);
    for (std::size_t i = 0; i < w.target_rows.size(); ++i) {
      for (std::size_t c = 0; c < obs_dim; ++c) {
        preds.push_back(r.prediction.value().at(w.target_rows[i], c) * sd[c] + mean[c]);
        targets.push_back(w.targets.at(i, c) * sd[c] + mean[c]);
      }
      ++rows;
    }
  }
  if (rows == 0) fail(ErrorKind::kEmptyDataset, "no reconstruction targets in dataset");
  return normalized_recon_error(Tensor({rows, obs_dim}, std::move(preds)), Tensor({rows, obs_dim}, std::move(targets)),
                                variance);
}

void observation_stats(const data::Dataset& ds, std::vector<double>& mean, std::vector<double>& stddev) {
  const std::size_t n = ds.obs_spec.flat_size();
  mean.assign(n, 0.0);
  stddev.assign(n, 0.0);
  std::size_t count = 0;
  for (const auto& t : ds.trajectories)
    for (const auto& o : t.observations) {
      for (std::size_t c = 0; c < n; ++c) mean[c] += o[c];
      ++count;
    }
  for (auto& m : mean) m /= static_cast<double>(count);
  for (const auto& t : ds.trajectories)
    for (const auto& o : t.observations)
      for (std::size_t c = 0; c < n; ++c) stddev[c] += (o[c] - mean[c]) * (o[c] - mean[c]);
  for (auto& s : stddev) {
    s = std::sqrt(s / static_cast<double>(count));
    if (s < 1e-8) s = 1.0;
  }
}

}  // namespace bexrl::vq
