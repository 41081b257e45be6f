#include "bexrl/attr/bc_model.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "bexrl/ad/ops.hpp"
#include "bexrl/util/error.hpp"

namespace bexrl::attr {

using ad::Tensor;
using ad::Var;

void BcConfig::validate() const {
  if (hidden < 1) fail(ErrorKind::kInvalidConfig, "bc hidden width must be >= 1");
  for (auto c : channels) {
    if (c < 1) fail(ErrorKind::kInvalidConfig, "bc conv channels must be >= 1");
  }
  if (!(learning_rate > 0.0)) fail(ErrorKind::kInvalidConfig, "bc learning_rate must be > 0");
  if (batch_size < 1) fail(ErrorKind::kInvalidConfig, "bc batch_size must be >= 1");
  if (num_epochs < 1) fail(ErrorKind::kInvalidConfig, "bc num_epochs must be >= 1");
}

nlohmann::ordered_json bc_config_to_json(const BcConfig& cfg) {
  nlohmann::ordered_json j;
  j["hidden"] = cfg.hidden;
  j["channels"] = cfg.channels;
  j["learning_rate"] = cfg.learning_rate;
  j["batch_size"] = cfg.batch_size;
  j["num_epochs"] = cfg.num_epochs;
  j["seed"] = cfg.seed;
  return j;
}

BcConfig bc_config_from_json(const nlohmann::json& j) {
  BcConfig cfg;
  cfg.hidden = j.at("hidden").get<std::size_t>();
  cfg.channels = j.at("channels").get<std::array<std::size_t, 3>>();
  cfg.learning_rate = j.at("learning_rate").get<double>();
  cfg.batch_size = j.at("batch_size").get<std::size_t>();
  cfg.num_epochs = j.at("num_epochs").get<std::size_t>();
  cfg.seed = j.at("seed").get<std::uint64_t>();
  cfg.validate();
  return cfg;
}

BcModel::BcModel(data::ObservationSpec obs_spec, data::ActionSpec act_spec, const BcConfig& cfg, std::string scope)
    : obs_spec_(obs_spec), act_spec_(act_spec), cfg_(cfg), scope_(std::move(scope)) {
  cfg_.validate();
  std::mt19937_64 rng(cfg_.seed);
  const std::size_t in = obs_spec_.flat_size();
  const std::size_t out = act_spec_.encoded_size();
  obs_mean_ = params_.add("norm.obs_mean", Tensor({in}, 0.0), false);
  obs_std_ = params_.add("norm.obs_std", Tensor({in}, 1.0), false);
  if (obs_spec_.is_image()) {
    arch_ = BcArch::kCnn3;
    std::size_t prev = obs_spec_.channels;
    for (std::size_t l = 0; l < 3; ++l) {
      const std::size_t c = cfg_.channels[l];
      const std::string name = "conv" + std::to_string(l + 1);
      conv_w_[l] = params_.add(name + ".weight", ad::uniform_init({c, prev, 3, 3}, prev * 9, rng));
      conv_b_[l] = params_.add(name + ".bias", ad::uniform_init({c}, prev * 9, rng));
      prev = c;
    }
    fc3_ = ad::Linear(params_, "head", prev, out, rng);
  } else {
    arch_ = BcArch::kMlp3;
    fc1_ = ad::Linear(params_, "fc1", in, cfg_.hidden, rng);
    fc2_ = ad::Linear(params_, "fc2", cfg_.hidden, cfg_.hidden, rng);
    fc3_ = ad::Linear(params_, "fc3", cfg_.hidden, out, rng);
  }
}

void BcModel::set_normalization(std::span<const double> mean, std::span<const double> stddev) {
  obs_mean_.mutable_value() = Tensor::vector(mean);
  obs_std_.mutable_value() = Tensor::vector(stddev);
}

Var BcModel::forward(const Tensor& observations) const {
  const std::size_t in = obs_spec_.flat_size();
  if (observations.rank() != 2 || observations.dim(1) != in) {
    fail(ErrorKind::kSpecMismatch, "bc forward: observations " + ad::shape_str(observations.shape()) +
                                       " do not match observation size " + std::to_string(in));
  }
  Tensor x = observations;
  const auto& mean = obs_mean_.value();
  const auto& sd = obs_std_.value();
  for (std::size_t r = 0; r < x.rows(); ++r)
    for (std::size_t c = 0; c < in; ++c) x.at(r, c) = (x.at(r, c) - mean[c]) / sd[c];
  if (arch_ == BcArch::kMlp3) {
    const Var h1 = ad::relu(fc1_(Var::constant(std::move(x))));
    const Var h2 = ad::relu(fc2_(h1));
    return fc3_(h2);
  }
  const std::size_t b = x.rows();
  Var h = Var::constant(x.reshaped({b, obs_spec_.channels, obs_spec_.height, obs_spec_.width}));
  for (std::size_t l = 0; l < 3; ++l) h = ad::relu(ad::conv2d(h, conv_w_[l], conv_b_[l]));
  return fc3_(ad::global_avg_pool(h));
}

std::vector<double> BcModel::predict(const data::Observation& observation) const {
  const Var out = forward(Tensor({1, observation.size()}, observation));
  if (!act_spec_.is_discrete()) {
    const auto v = out.value().values();
    return {v.begin(), v.end()};
  }
  const Tensor probs = ad::softmax_rows(out.value());
  return {probs.values().begin(), probs.values().end()};
}

ad::Checkpoint BcModel::to_checkpoint(nlohmann::ordered_json extra_metadata) const {
  ad::Checkpoint ckpt;
  ckpt.metadata["kind"] = "bc";
  ckpt.metadata["scope"] = scope_;
  ckpt.metadata["arch"] = arch_ == BcArch::kMlp3 ? "mlp3" : "cnn3";
  ckpt.metadata["obs_spec"] = data::obs_spec_to_json(obs_spec_);
  ckpt.metadata["act_spec"] = data::act_spec_to_json(act_spec_);
  ckpt.metadata["bc"] = bc_config_to_json(cfg_);
  ckpt.metadata["train_samples"] = train_samples_;
  for (auto& [k, v] : extra_metadata.items()) ckpt.metadata[k] = v;
  ckpt.tensors = params_.snapshot();
  return ckpt;
}

BcModel BcModel::from_checkpoint(const ad::Checkpoint& ckpt) {
  const auto& meta = ckpt.metadata;
  if (meta.value("kind", "") != "bc") fail(ErrorKind::kSpecMismatch, "checkpoint is not a behavior-cloning model");
  BcModel model(data::obs_spec_from_json(meta.at("obs_spec")), data::act_spec_from_json(meta.at("act_spec")),
                bc_config_from_json(meta.at("bc")), meta.at("scope").get<std::string>());
  model.train_samples_ = meta.at("train_samples").get<std::size_t>();
  model.params_.assign(ckpt.tensors);
  return model;
}

BcModel train_bc(std::span<const StateAction> segments, const data::ObservationSpec& obs_spec,
                 const data::ActionSpec& act_spec, const BcConfig& cfg, std::string scope) {
  if (segments.empty()) fail(ErrorKind::kEmptySegments, "no state-action pairs for '" + scope + "'");
  BcModel model(obs_spec, act_spec, cfg, std::move(scope));
  model.train_samples_ = segments.size();
  const std::size_t in = obs_spec.flat_size();
  const std::size_t out = act_spec.encoded_size();
  for (const auto& s : segments) {
    if (s.observation.size() != in) fail(ErrorKind::kSpecMismatch, "segment observation size mismatch");
  }

  std::vector<double> mean(in, 0.0), sd(in, 0.0);
  for (const auto& s : segments)
    for (std::size_t c = 0; c < in; ++c) mean[c] += s.observation[c];
  for (auto& m : mean) m /= static_cast<double>(segments.size());
  for (const auto& s : segments)
    for (std::size_t c = 0; c < in; ++c) sd[c] += (s.observation[c] - mean[c]) * (s.observation[c] - mean[c]);
  for (auto& v : sd) {
    v = std::sqrt(v / static_cast<double>(segments.size()));
    if (v < 1e-8) v = 1.0;
  }
  model.set_normalization(mean, sd);

  std::mt19937_64 rng(cfg.seed ^ 0xb5ad4eceda1ce2a9ULL);
  std::vector<std::size_t> order(segments.size());
  std::iota(order.begin(), order.end(), 0);
  const std::size_t steps_per_epoch = (order.size() + cfg.batch_size - 1) / cfg.batch_size;
  const std::size_t total_steps = steps_per_epoch * cfg.num_epochs;
  std::size_t step = 0;
  auto& params = model.params().all();
  for (std::size_t epoch = 0; epoch < cfg.num_epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t b = 0; b < order.size(); b += cfg.batch_size) {
      const std::size_t end = std::min(order.size(), b + cfg.batch_size);
      const std::size_t rows = end - b;
      Tensor obs({rows, in}, 0.0);
      for (std::size_t r = 0; r < rows; ++r) {
        const auto& o = segments[order[b + r]].observation;
        std::copy(o.begin(), o.end(), obs.row(r).begin());
      }
      model.params().zero_grad();
      const Var pred = model.forward(obs);
      Var loss;
      if (act_spec.is_discrete()) {
        std::vector<std::size_t> labels(rows);
        for (std::size_t r = 0; r < rows; ++r) {
          labels[r] = static_cast<std::size_t>(data::action_class(segments[order[b + r]].action));
        }
        loss = ad::cross_entropy_loss(pred, labels);
      } else {
        Tensor target({rows, out}, 0.0);
        for (std::size_t r = 0; r < rows; ++r) {
          const auto& a = segments[order[b + r]].action;
          if (a.size() != out) fail(ErrorKind::kSpecMismatch, "segment action size mismatch");
          std::copy(a.begin(), a.end(), target.row(r).begin());
        }
        loss = ad::mse_loss(pred, Var::constant(std::move(target)));
      }
      if (!std::isfinite(loss.value().item())) {
        fail(ErrorKind::kDivergence, "behavior cloning loss became non-finite for '" + model.scope() + "'");
      }
      ad::backward(loss);
      const double lr = cfg.learning_rate * (1.0 - static_cast<double>(step) / static_cast<double>(total_steps));
      ad::adam_step(params, ad::AdamConfig{lr});
      ++step;
    }
  }
  return model;
}

std::vector<StateAction> all_pairs(const data::Dataset& ds) {
  std::vector<StateAction> out;
  out.reserve(ds.total_steps());
  for (const auto& t : ds.trajectories)
    for (std::size_t i = 0; i < t.size(); ++i) out.push_back({t.observations[i], t.actions[i]});
  return out;
}

}  // namespace bexrl::attr
