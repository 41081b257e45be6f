#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "bexrl/ad/checkpoint.hpp"
#include "bexrl/ad/nn.hpp"
#include "bexrl/data/dataset.hpp"

namespace bexrl::attr {

enum class BcArch { kMlp3, kCnn3 };

struct BcConfig {
  std::size_t hidden = 64;                        // mlp3 width
  std::array<std::size_t, 3> channels{8, 16, 16};  // cnn3 conv widths
  double learning_rate = 1e-3;
  std::size_t batch_size = 64;
  std::size_t num_epochs = 30;
  std::uint64_t seed = 0;

  void validate() const;
};

nlohmann::ordered_json bc_config_to_json(const BcConfig& cfg);
BcConfig bc_config_from_json(const nlohmann::json& j);

struct StateAction {
  data::Observation observation;
  data::Action action;
};

// Behavior-cloning network: a 3-layer MLP for vector observations or three
// 3x3 conv layers + global average pooling + linear head for images. Outputs
// the action (continuous) or C class logits (discrete).
class BcModel {
 public:
  BcModel(data::ObservationSpec obs_spec, data::ActionSpec act_spec, const BcConfig& cfg, std::string scope);
  BcModel(const BcModel&) = delete;
  BcModel& operator=(const BcModel&) = delete;
  BcModel(BcModel&&) = default;
  BcModel& operator=(BcModel&&) = default;

  BcArch arch() const { return arch_; }
  const std::string& scope() const { return scope_; }
  const data::ObservationSpec& obs_spec() const { return obs_spec_; }
  const data::ActionSpec& act_spec() const { return act_spec_; }
  const BcConfig& config() const { return cfg_; }
  ad::ParamSet& params() { return params_; }
  const ad::ParamSet& params() const { return params_; }
  std::size_t train_samples() const { return train_samples_; }

  void set_normalization(std::span<const double> mean, std::span<const double> stddev);

  // Raw observations (B, obs_flat) -> (B, d) actions or (B, C) logits.
  ad::Var forward(const ad::Tensor& observations) const;
  // Continuous: predicted action. Discrete: softmax class probabilities.
  std::vector<double> predict(const data::Observation& observation) const;

  ad::Checkpoint to_checkpoint(nlohmann::ordered_json extra_metadata) const;
  static BcModel from_checkpoint(const ad::Checkpoint& ckpt);

 private:
  friend BcModel train_bc(std::span<const StateAction>, const data::ObservationSpec&, const data::ActionSpec&,
                          const BcConfig&, std::string);

  data::ObservationSpec obs_spec_;
  data::ActionSpec act_spec_;
  BcConfig cfg_;
  std::string scope_;
  BcArch arch_ = BcArch::kMlp3;
  std::size_t train_samples_ = 0;
  ad::ParamSet params_;
  ad::Var obs_mean_, obs_std_;
  ad::Linear fc1_, fc2_, fc3_;
  std::array<ad::Var, 3> conv_w_, conv_b_;
};

// Supervised fit with Adam: MSE regression for continuous actions,
// cross-entropy over logits for discrete ones. Deterministic given cfg.seed.
BcModel train_bc(std::span<const StateAction> segments, const data::ObservationSpec& obs_spec,
                 const data::ActionSpec& act_spec, const BcConfig& cfg, std::string scope);

// Every (observation, action) pair of the dataset, in trajectory order.
std::vector<StateAction> all_pairs(const data::Dataset& ds);

}  // namespace bexrl::attr
