#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <vector>

#include <json.hpp>

#include "bexrl/vq/model.hpp"

namespace bexrl::vq {

struct TrainConfig {
  ModelConfig model;
  double learning_rate = 1e-3;
  // Multiplier on the learning rate for the codebook parameter only.
  double codebook_lr_scale = 30.0;
  std::size_t batch_size = 8;
  std::size_t num_epochs = 80;
  double alpha = 0.5;  // weight of the VQ term
  // Teacher-forcing probability decays linearly from this value at the first
  // epoch to 0 at the last.
  double teacher_forcing_start = 1.0;
  // Learning rate decays linearly to 0 over all optimizer steps when set.
  bool lr_decay = true;
  std::uint64_t seed = 0;

  void validate() const;
};

nlohmann::ordered_json train_config_to_json(const TrainConfig& cfg);
TrainConfig train_config_from_json(const nlohmann::json& j);

struct EpochStats {
  double recon_loss = 0.0;
  double vq_loss = 0.0;
  double occupancy = 0.0;  // codes used during this epoch / N
};

struct TrainingCurve {
  std::vector<EpochStats> epochs;
  // Codes used at least once over the last 10% of optimizer steps, / N.
  double final_occupancy = 0.0;
  std::size_t total_steps = 0;
};

nlohmann::ordered_json curve_to_json(const TrainingCurve& curve);

double teacher_forcing_at(const TrainConfig& cfg, std::size_t epoch);
double learning_rate_at(const TrainConfig& cfg, std::size_t step, std::size_t total_steps);

struct LossTerms {
  ad::Var recon;
  ad::Var vq;
  ad::Var total;  // recon + alpha * vq
  std::vector<std::size_t> tokens;
};

// Loss for one window. Windows without any next-observation target contribute
// only the VQ term.
LossTerms window_loss(const VqVaeModel& model, const Window& w, double alpha, double teacher_forcing,
                      std::mt19937_64* rng);

struct TrainResult {
  VqVaeModel model;
  TrainingCurve curve;
};

using EpochCallback = std::function<void(const VqVaeModel&, std::size_t epoch)>;

// Deterministic given cfg.seed. Throws DivergenceError on a non-finite loss.
TrainResult train_vqvae(const data::Dataset& ds, const TrainConfig& cfg,
                        const EpochCallback& on_epoch_end = {});

}  // namespace bexrl::vq
