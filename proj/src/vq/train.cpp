#include "bexrl/vq/train.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "bexrl/ad/ops.hpp"
#include "bexrl/util/error.hpp"

namespace bexrl::vq {

using ad::Tensor;
using ad::Var;

void TrainConfig::validate() const {
  model.validate();
  if (!(learning_rate > 0.0)) fail(ErrorKind::kInvalidConfig, "learning_rate must be > 0");
  if (!(codebook_lr_scale > 0.0)) fail(ErrorKind::kInvalidConfig, "codebook_lr_scale must be > 0");
  if (batch_size < 1) fail(ErrorKind::kInvalidConfig, "batch_size must be >= 1");
  if (num_epochs < 1) fail(ErrorKind::kInvalidConfig, "num_epochs must be >= 1");
  if (!(alpha > 0.0)) fail(ErrorKind::kInvalidConfig, "alpha must be > 0");
  if (teacher_forcing_start < 0.0 || teacher_forcing_start > 1.0) {
    fail(ErrorKind::kInvalidConfig, "teacher_forcing_start must lie in [0, 1]");
  }
}

nlohmann::ordered_json train_config_to_json(const TrainConfig& cfg) {
  nlohmann::ordered_json j;
  j["model"] = model_config_to_json(cfg.model);
  j["learning_rate"] = cfg.learning_rate;
  j["codebook_lr_scale"] = cfg.codebook_lr_scale;
  j["batch_size"] = cfg.batch_size;
  j["num_epochs"] = cfg.num_epochs;
  j["alpha"] = cfg.alpha;
  j["teacher_forcing_start"] = cfg.teacher_forcing_start;
  j["lr_decay"] = cfg.lr_decay;
  j["seed"] = cfg.seed;
  return j;
}

TrainConfig train_config_from_json(const nlohmann::json& j) {
  TrainConfig cfg;
  cfg.model = model_config_from_json(j.at("model"));
  cfg.learning_rate = j.at("learning_rate").get<double>();
  cfg.codebook_lr_scale = j.at("codebook_lr_scale").get<double>();
  cfg.batch_size = j.at("batch_size").get<std::size_t>();
  cfg.num_epochs = j.at("num_epochs").get<std::size_t>();
  cfg.alpha = j.at("alpha").get<double>();
  cfg.teacher_forcing_start = j.at("teacher_forcing_start").get<double>();
  cfg.lr_decay = j.at("lr_decay").get<bool>();
  cfg.seed = j.at("seed").get<std::uint64_t>();
  cfg.validate();
  return cfg;
}

nlohmann::ordered_json curve_to_json(const TrainingCurve& curve) {
  nlohmann::ordered_json j;
  auto& epochs = j["epochs"];
  epochs = nlohmann::ordered_json::array();
  for (const auto& e : curve.epochs) {
    epochs.push_back({{"recon_loss", e.recon_loss}, {"vq_loss", e.vq_loss}, {"occupancy", e.occupancy}});
  }
  j["final_occupancy"] = curve.final_occupancy;
  j["total_steps"] = curve.total_steps;
  return j;
}

double teacher_forcing_at(const TrainConfig& cfg, std::size_t epoch) {
  if (cfg.num_epochs <= 1) return 0.0;
  const double frac = static_cast<double>(epoch) / static_cast<double>(cfg.num_epochs - 1);
  return std::max(0.0, cfg.teacher_forcing_start * (1.0 - frac));
}

double learning_rate_at(const TrainConfig& cfg, std::size_t step, std::size_t total_steps) {
  if (!cfg.lr_decay || total_steps == 0) return cfg.learning_rate;
  return cfg.learning_rate * (1.0 - static_cast<double>(step) / static_cast<double>(total_steps));
}

LossTerms window_loss(const VqVaeModel& model, const Window& w, double alpha, double teacher_forcing,
                      std::mt19937_64* rng) {
  const ForwardResult fwd = model.forward(w, teacher_forcing, rng);
  LossTerms terms;
  terms.tokens = fwd.tokens;
  terms.vq = vq_loss(fwd.latent, fwd.code);
  if (w.target_rows.empty()) {
    terms.recon = Var::constant(Tensor::scalar(0.0));
  } else {
    terms.recon = ad::mse_loss(ad::gather_rows(fwd.prediction, w.target_rows), Var::constant(w.targets));
  }
  terms.total = ad::add(terms.recon, ad::scale(terms.vq, alpha));
  return terms;
}

namespace {

// Seeds the codebook with encoder outputs at randomly chosen timesteps so that
// codes start inside the latent distribution.
void init_codebook_from_data(VqVaeModel& model, const std::vector<Window>& windows, std::mt19937_64& rng) {
  const std::size_t n = model.config().num_codes;
  const std::size_t d = model.config().embed_dim;
  std::vector<std::size_t> order(windows.size());
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), rng);
  std::vector<std::vector<double>> rows;
  for (std::size_t i = 0; i < order.size() && rows.size() < 8 * n; ++i) {
    const Var z = model.encode(windows[order[i]]);
    for (std::size_t t = 0; t < z.value().rows(); ++t) {
      const auto r = z.value().row(t);
      rows.emplace_back(r.begin(), r.end());
    }
  }
  std::shuffle(rows.begin(), rows.end(), rng);
  Tensor codes = model.codebook().codes();
  for (std::size_t k = 0; k < n && k < rows.size(); ++k)
    for (std::size_t c = 0; c < d; ++c) codes.at(k, c) = rows[k][c];
  model.set_codebook(codes);
}

}  // namespace

TrainResult train_vqvae(const data::Dataset& ds, const TrainConfig& cfg, const EpochCallback& on_epoch_end) {
  ds.validate();
  cfg.validate();
  VqVaeModel model(ds.obs_spec, ds.act_spec, cfg.model, cfg.seed);
  std::vector<double> mean, sd;
  observation_stats(ds, mean, sd);
  model.set_normalization(mean, sd);

  const std::vector<Window> windows = model.make_windows(ds);
  std::mt19937_64 rng(cfg.seed ^ 0x9e3779b97f4a7c15ULL);
  init_codebook_from_data(model, windows, rng);

  const std::size_t steps_per_epoch = (windows.size() + cfg.batch_size - 1) / cfg.batch_size;
  const std::size_t total_steps = steps_per_epoch * cfg.num_epochs;
  const std::size_t tail = std::max<std::size_t>(1, (total_steps + 9) / 10);
  const std::size_t tail_start = total_steps - tail;

  TrainingCurve curve;
  curve.total_steps = total_steps;
  std::vector<std::size_t> tail_assignments;
  std::vector<std::size_t> order(windows.size());
  std::iota(order.begin(), order.end(), 0);
  auto& params = model.params().all();
  std::size_t step = 0;

  for (std::size_t epoch = 0; epoch < cfg.num_epochs; ++epoch) {
    const double tf = teacher_forcing_at(cfg, epoch);
    std::shuffle(order.begin(), order.end(), rng);
    EpochStats stats;
    std::vector<std::size_t> epoch_assignments;
    for (std::size_t b = 0; b < order.size(); b += cfg.batch_size) {
      const std::size_t end = std::min(order.size(), b + cfg.batch_size);
      const double inv_batch = 1.0 / static_cast<double>(end - b);
      model.params().zero_grad();
      std::vector<Var> totals;
      for (std::size_t i = b; i < end; ++i) {
        LossTerms terms = window_loss(model, windows[order[i]], cfg.alpha, tf, &rng);
        const double recon = terms.recon.value().item();
        const double vq = terms.vq.value().item();
        if (!std::isfinite(recon) || !std::isfinite(vq)) {
          fail(ErrorKind::kDivergence, "non-finite loss at epoch " + std::to_string(epoch));
        }
        stats.recon_loss += recon;
        stats.vq_loss += vq;
        epoch_assignments.insert(epoch_assignments.end(), terms.tokens.begin(), terms.tokens.end());
        if (step >= tail_start) {
          tail_assignments.insert(tail_assignments.end(), terms.tokens.begin(), terms.tokens.end());
        }
        totals.push_back(std::move(terms.total));
      }
      Var batch_loss = totals[0];
      for (std::size_t i = 1; i < totals.size(); ++i) batch_loss = ad::add(batch_loss, totals[i]);
      batch_loss = ad::scale(batch_loss, inv_batch);
      ad::backward(batch_loss);
      const double lr = learning_rate_at(cfg, step, total_steps);
      for (auto& p : params) {
        const double scale = p.name == "codebook" ? cfg.codebook_lr_scale : 1.0;
        ad::adam_step(std::span<ad::Parameter>(&p, 1), ad::AdamConfig{lr * scale});
      }
      ++step;
      for (const auto& p : params) {
        if (!p.tensor().all_finite()) fail(ErrorKind::kDivergence, "parameter '" + p.name + "' became non-finite");
      }
    }
    stats.recon_loss /= static_cast<double>(windows.size());
    stats.vq_loss /= static_cast<double>(windows.size());
    stats.occupancy = codebook_occupancy(epoch_assignments, cfg.model.num_codes);
    curve.epochs.push_back(stats);
    if (on_epoch_end) on_epoch_end(model, epoch);
  }
  curve.final_occupancy = codebook_occupancy(tail_assignments, cfg.model.num_codes);
  return TrainResult{std::move(model), std::move(curve)};
}

}  // namespace bexrl::vq
