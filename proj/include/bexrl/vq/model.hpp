#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include <json.hpp>

#include "bexrl/ad/checkpoint.hpp"
#include "bexrl/ad/nn.hpp"
#include "bexrl/data/dataset.hpp"
#include "bexrl/vq/quantize.hpp"

namespace bexrl::vq {

enum class Fusion {
  kSum,     // separate observation/action embeddings, summed
  kConcat,  // one projection of the concatenated pair
};

struct ModelConfig {
  std::size_t embed_dim = 32;
  std::size_t num_layers = 2;
  std::size_t num_heads = 2;
  std::size_t hidden_dim = 64;
  std::size_t num_codes = 16;
  std::size_t seq_len = 20;
  Fusion fusion = Fusion::kSum;

  void validate() const;
};

nlohmann::ordered_json model_config_to_json(const ModelConfig& cfg);
ModelConfig model_config_from_json(const nlohmann::json& j);

// One non-overlapping slice of a trajectory, in normalized coordinates.
struct Window {
  std::size_t trajectory = 0;
  std::size_t start = 0;
  ad::Tensor observations;  // (T, obs_dim), normalized
  ad::Tensor actions;       // (T, action encoding)
  // Positions t whose successor observation exists in the trajectory, and the
  // matching normalized s_{t+1} rows.
  std::vector<std::size_t> target_rows;
  ad::Tensor targets;

  std::size_t length() const { return observations.dim(0); }
};

struct ForwardResult {
  ad::Var latent;      // z, (T, d)
  std::vector<std::size_t> tokens;
  ad::Var code;        // selected codebook rows, (T, d)
  ad::Var prediction;  // decoder output, (T, obs_dim); row t predicts s_{t+1}
};

// Transformer encoder -> codebook -> transformer decoder over state-action
// windows. Both stacks are causally masked.
class VqVaeModel {
 public:
  VqVaeModel(data::ObservationSpec obs_spec, data::ActionSpec act_spec, ModelConfig cfg,
             std::uint64_t seed);
  VqVaeModel(const VqVaeModel&) = delete;
  VqVaeModel& operator=(const VqVaeModel&) = delete;
  VqVaeModel(VqVaeModel&&) = default;
  VqVaeModel& operator=(VqVaeModel&&) = default;

  const data::ObservationSpec& obs_spec() const { return obs_spec_; }
  const data::ActionSpec& act_spec() const { return act_spec_; }
  const ModelConfig& config() const { return cfg_; }
  ad::ParamSet& params() { return params_; }
  const ad::ParamSet& params() const { return params_; }

  Codebook codebook() const { return Codebook(codebook_.value()); }
  ad::Var codebook_var() const { return codebook_; }
  void set_codebook(const ad::Tensor& codes);

  // Per-dimension observation statistics used for input/target scaling.
  void set_normalization(std::span<const double> mean, std::span<const double> stddev);
  std::span<const double> obs_mean() const { return obs_mean_.value().values(); }
  std::span<const double> obs_std() const { return obs_std_.value().values(); }

  std::vector<Window> make_windows(const data::Dataset& ds) const;

  ad::Var encode(const Window& w) const;
  // Quantizes encoder output and decodes. With teacher_forcing < 1 each input
  // after the first is, with probability 1 - teacher_forcing, replaced by the
  // decoder's own detached autoregressive prediction of it, and the decoder
  // runs once more on the mixed inputs.
  ForwardResult forward(const Window& w, double teacher_forcing, std::mt19937_64* rng) const;
  std::vector<std::size_t> tokens(const Window& w) const;

  ad::Checkpoint to_checkpoint(nlohmann::ordered_json extra_metadata) const;
  static VqVaeModel from_checkpoint(const ad::Checkpoint& ckpt);

 private:
  ad::Var decode(const ad::Var& quantized, const ad::Tensor& obs_inputs) const;
  ad::Var positions(std::size_t length) const;

  data::ObservationSpec obs_spec_;
  data::ActionSpec act_spec_;
  ModelConfig cfg_;
  std::uint64_t seed_ = 0;
  ad::ParamSet params_;
  ad::Var obs_mean_, obs_std_;
  ad::Tensor positions_;
  ad::Linear obs_embed_, act_embed_, pair_embed_;
  std::vector<ad::TransformerBlock> encoder_;
  ad::LayerNorm encoder_norm_;
  ad::Linear latent_proj_;
  ad::Var codebook_;
  ad::Linear code_embed_, dec_obs_embed_;
  std::vector<ad::TransformerBlock> decoder_;
  ad::LayerNorm decoder_norm_;
  ad::Linear head_;
};

struct TokenSequence {
  std::size_t trajectory = 0;
  std::vector<std::size_t> tokens;
};

// One token per timestep, from quantized encoder outputs over the same
// non-overlapping windows used in training.
std::vector<TokenSequence> tokenize(const VqVaeModel& model, const data::Dataset& ds);

// Mean squared next-observation error divided by per-dimension dataset
// variance, decoding without teacher forcing.
double normalized_recon_loss(const VqVaeModel& model, const data::Dataset& ds);

// Per-dimension mean and standard deviation over all observations; standard
// deviations below 1e-8 are replaced by 1.
void observation_stats(const data::Dataset& ds, std::vector<double>& mean, std::vector<double>& stddev);

}  // namespace bexrl::vq
